#![no_main]

use libfuzzer_sys::fuzz_target;
use tblab::io::parse_lattice;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((lattice, squares)) = parse_lattice(text) {
        for key in squares {
            let sq = lattice.square(key);
            let _ = sq.rect();
        }
    }
});
