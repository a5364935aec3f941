#![no_main]

use libfuzzer_sys::fuzz_target;
use tblab::io::{measure_json, parse_measure, MeasureMeta};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(mu) = parse_measure(text) {
        let _ = mu.total();
        let _ = mu.bounding_disk();
        let again = measure_json(&mu, MeasureMeta::default()).expect("valid measure serializes");
        assert_eq!(parse_measure(&again).expect("round trip parses"), mu);
    }
});
