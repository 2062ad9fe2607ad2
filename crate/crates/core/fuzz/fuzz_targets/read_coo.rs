#![no_main]

use libfuzzer_sys::fuzz_target;
use sbp_embed::sparse::{read_coo, write_coo};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = read_coo(text) {
        let mut out = Vec::new();
        write_coo(&m, &mut out).unwrap();
        let back = read_coo(std::str::from_utf8(&out).unwrap()).expect("re-read of written matrix");
        assert_eq!(back.shape(), m.shape());
        assert_eq!(back.nnz(), m.nnz());
    }
});
