#![no_main]

use libfuzzer_sys::fuzz_target;
use wallstrain::io::parse_field_header;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(header) = parse_field_header(text) {
        let _ = header.data_len();
    }
});
