#![no_main]

use libfuzzer_sys::fuzz_target;
use sbp_embed::mesh::{parse_mesh, to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(mesh) = parse_mesh(text) {
        // Anything accepted must survive a round trip.
        let back = parse_mesh(&to_json(&mesh)).expect("re-parse of serialized mesh");
        assert_eq!(back.num_blocks(), mesh.num_blocks());
        assert_eq!(back.interfaces.len(), mesh.interfaces.len());
    }
});
