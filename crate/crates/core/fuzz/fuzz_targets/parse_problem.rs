#![no_main]

use libfuzzer_sys::fuzz_target;
use sbp_embed::wave::{parse_problem, problem_to_toml};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(problem) = parse_problem(text) {
        let back = parse_problem(&problem_to_toml(&problem)).expect("re-parse of serialized problem");
        assert_eq!(back, problem);
    }
});
