#![no_main]

use libfuzzer_sys::fuzz_target;
use tblab::io::parse_envelope;
use tblab::pt;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(env) = parse_envelope(text) {
        for p in [pt(0.0, 0.0), pt(0.3, -0.1), pt(-2.0, 5.0)] {
            let v = env.eval(p);
            assert!(v >= 0.0 || v.is_nan());
        }
    }
});
