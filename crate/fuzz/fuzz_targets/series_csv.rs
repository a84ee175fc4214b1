#![no_main]

use fpfunnel::record::Series;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(series) = Series::parse_csv(text) {
            let out = series.to_csv();
            let back = Series::parse_csv(&out).expect("written series parses");
            assert_eq!(back.to_csv(), out);
        }
    }
});
