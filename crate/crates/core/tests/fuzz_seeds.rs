//! Every checked-in fuzz seed must be accepted by its parser and survive the
//! round trip the fuzz target asserts.

use std::path::{Path, PathBuf};

use sbp_embed::mesh::{parse_mesh, to_json};
use sbp_embed::sparse::{read_coo, write_coo};
use sbp_embed::wave::{parse_problem, problem_to_toml};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {dir:?}");
    out
}

#[test]
fn mesh_seeds() {
    for (path, text) in seeds("parse_mesh") {
        let mesh = parse_mesh(&text).unwrap_or_else(|e| panic!("{path:?}: {e}"));
        let back = parse_mesh(&to_json(&mesh)).unwrap();
        assert_eq!(back.num_blocks(), mesh.num_blocks(), "{path:?}");
    }
}

#[test]
fn problem_seeds() {
    for (path, text) in seeds("parse_problem") {
        let p = parse_problem(&text).unwrap_or_else(|e| panic!("{path:?}: {e}"));
        assert_eq!(parse_problem(&problem_to_toml(&p)).unwrap(), p, "{path:?}");
    }
}

#[test]
fn coo_seeds() {
    for (path, text) in seeds("read_coo") {
        let m = read_coo(&text).unwrap_or_else(|e| panic!("{path:?}: {e}"));
        let mut out = Vec::new();
        write_coo(&m, &mut out).unwrap();
        let back = read_coo(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(back.shape(), m.shape(), "{path:?}");
        assert_eq!(back.nnz(), m.nnz(), "{path:?}");
    }
}
