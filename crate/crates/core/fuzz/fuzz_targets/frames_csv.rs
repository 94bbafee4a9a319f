#![no_main]

use libfuzzer_sys::fuzz_target;
use wallstrain::io::{format_frames, parse_frames};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(frames) = parse_frames(text) {
        assert_eq!(parse_frames(&format_frames(&frames)).expect("formatted frames parse"), frames);
    }
});
