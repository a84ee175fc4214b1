#![no_main]

use fpfunnel::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ScenarioConfig::from_json_str(text) {
            // accepted configs survive a serialize/parse cycle unchanged
            let again = serde_json::to_string(&cfg).expect("config serializes");
            assert_eq!(ScenarioConfig::from_json_str(&again).expect("reparses"), cfg);
        }
    }
});
