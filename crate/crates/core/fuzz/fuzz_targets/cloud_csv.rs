#![no_main]

use libfuzzer_sys::fuzz_target;
use wallstrain::io::{format_cloud, parse_cloud};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cloud) = parse_cloud(text) {
        let again = parse_cloud(&format_cloud(&cloud)).expect("formatted cloud parses");
        assert_eq!(again.points(), cloud.points());
        assert_eq!(again.labels(), cloud.labels());
    }
});
