#![no_main]

use fpfunnel::record::Snapshot;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(snap) = Snapshot::parse_csv(text, 0.0) {
            let out = snap.to_csv();
            let back = Snapshot::parse_csv(&out, 0.0).expect("written snapshot parses");
            assert_eq!(back.to_csv(), out);
        }
    }
});
