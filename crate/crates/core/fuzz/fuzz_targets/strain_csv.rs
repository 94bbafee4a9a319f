#![no_main]

use libfuzzer_sys::fuzz_target;
use wallstrain::io::{format_strain, parse_strain};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(strain) = parse_strain(text) {
        let again = parse_strain(&format_strain(&strain)).expect("formatted strain parses");
        assert_eq!(again.mask, strain.mask);
    }
});
