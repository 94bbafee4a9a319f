#![no_main]

use libfuzzer_sys::fuzz_target;
use wallstrain::io::{decode_field, encode_field, FieldHeader};

// The first three bytes pick grid dims, the rest is the voxel payload.
fuzz_target!(|data: &[u8]| {
    let [a, b, c, rest @ ..] = data else { return };
    let header = FieldHeader {
        dims: [*a as usize % 6, *b as usize % 6, *c as usize % 6],
        spacing_mm: [1.0, 0.5, 2.0],
        origin_mm: [-1.0, 0.0, 3.0],
        component_order: "RAS".into(),
        scalar: "f32le".into(),
        data_file: "field.bin".into(),
    };
    if let Ok(field) = decode_field(&header, rest) {
        let (h, bytes) = encode_field(&field, "field.bin");
        assert_eq!(h.dims, header.dims);
        assert_eq!(decode_field(&h, &bytes).expect("encoded field decodes"), field);
    }
});
