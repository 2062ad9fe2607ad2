use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sbp_embed::sparse::{read_coo, to_dense};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sbp-embed"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn verify_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("v.json");
    let out = run(&[
        "verify",
        "--p",
        "5",
        "--pairs",
        "3",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).lines().all(|l| !l.starts_with("FAIL")));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["passed"] == true));
    assert!(checks.iter().any(|c| c["name"] == "sbp-residual"));
}

#[test]
fn verify_fails_on_perturbed_weights() {
    let out = run(&[
        "verify",
        "--p",
        "7",
        "--pairs",
        "2",
        "--perturb-weight",
        "1e-6",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FAIL p=7 sbp-residual"));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["verify", "--p", "4"][..],
        &["verify", "--pairs", "0"],
        &["converge", "--levels", "1"],
        &["converge", "--start", "0"],
        &["converge", "--p", "6"],
        &["mesh-info"],
        &["mesh-info", "--circle", "1", "--mesh", "x.json"],
        &["mesh-info", "--circle", "1", "--dump-operators", "x"],
        &["frobnicate"],
        &["--threads", "0", "verify"],
    ] {
        assert_eq!(code(&run(args)), 2, "{args:?}");
    }
}

#[test]
fn converge_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let out = run(&[
        "converge",
        "--p",
        "5",
        "--levels",
        "2",
        "--start",
        "1",
        "--out",
        csv.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("p,n_blocks,N_dofs,l2_error,log10_error,rate_q"));
    let second: Vec<_> = lines[2].split(',').collect();
    assert_eq!(second[0], "5");
    assert_eq!(second[2], "2041");
    let err: f64 = second[3].parse().unwrap();
    assert!(err > 0.0 && err < 0.1);
    let q: f64 = second[5].parse().unwrap();
    assert!(q > 1.0);
}

#[test]
fn run_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mesh = data("half_annulus.json");
    let config = data("half_annulus.toml");
    let mut hashes = Vec::new();
    for (dir, threads) in [(&a, "1"), (&b, "2")] {
        let out = run(&[
            "run",
            "--mesh",
            mesh.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(report["status"], "ok");
        assert!(report["max_energy_increase_after_source"].as_f64().unwrap() <= 1e-10);
        assert!(dir.path().join("energy.csv").exists());
        hashes.push(report["state_hash"].as_str().unwrap().to_string());
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn run_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = data("half_annulus.json");
    let config = data("half_annulus.toml");

    let bad_config = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(&config).unwrap();
    std::fs::write(&bad_config, text.replace("far = \"outflow\"\n", "")).unwrap();
    let out = run(&[
        "run",
        "--mesh",
        mesh.to_str().unwrap(),
        "--config",
        bad_config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("far"));

    let bad_mesh = dir.path().join("bad.json");
    std::fs::write(&bad_mesh, "{\"version\": 1, \"blocks\": []").unwrap();
    let out = run(&[
        "run",
        "--mesh",
        bad_mesh.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);

    let out = run(&[
        "run",
        "--mesh",
        dir.path().join("missing.json").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn mesh_info_saves_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("circle.json");
    let ops = dir.path().join("ops");
    let out = run(&[
        "mesh-info",
        "--circle",
        "1",
        "--tag",
        "rim",
        "--save",
        saved.to_str().unwrap(),
        "--p",
        "5",
        "--dump-operators",
        ops.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("blocks      20"));
    assert!(text.contains("N reduced   521"));
    assert!(text.contains("tag         rim"));

    let mesh = sbp_embed::mesh::load_mesh(&saved).unwrap();
    assert_eq!(mesh.num_blocks(), 20);

    let h = read_coo(&std::fs::read_to_string(ops.join("h.coo")).unwrap()).unwrap();
    let l = read_coo(&std::fs::read_to_string(ops.join("laplace.coo")).unwrap()).unwrap();
    assert_eq!(h.rows(), 521);
    assert_eq!(l.rows(), 521);
    let area: f64 = h.diag().iter().map(|(_, v)| *v).sum();
    assert!((area - std::f64::consts::PI).abs() < 1e-6);
    // Constants are in the kernel of the Laplacian.
    let dense = to_dense(&l);
    let row_sum = dense.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max);
    assert!(row_sum < 1e-8, "{row_sum}");
    let coords = std::fs::read_to_string(ops.join("coords.txt")).unwrap();
    assert_eq!(coords.lines().count(), 521);

    let out = run(&["mesh-info", "--mesh", saved.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("tag         rim (8 sides)"));
}
