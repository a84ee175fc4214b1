#![no_main]

use fpfunnel::record::RunMeta;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = RunMeta::from_json_str(text);
    }
});
