#![no_main]

use libfuzzer_sys::fuzz_target;
use tblab::io::{parse_config, parse_suite_config};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        let again = serde_json::to_string(&cfg).expect("config serializes");
        assert_eq!(parse_config(&again).expect("round trip parses"), cfg);
    }
    let _ = parse_suite_config(text);
});
