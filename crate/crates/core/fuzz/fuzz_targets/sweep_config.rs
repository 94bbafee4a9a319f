#![no_main]

use libfuzzer_sys::fuzz_target;
use wallstrain::io::parse_sweep_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = parse_sweep_config(text) {
        let config = file.sweep_config().expect("accepted config validates");
        assert!(!config.cells().is_empty());
    }
});
