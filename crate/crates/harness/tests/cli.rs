use std::path::Path;
use std::process::{Command, Output};

use leafrep_harness::synth;

fn leafrep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leafrep"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn small_config(dir: &Path, extra: serde_json::Value) -> String {
    let mut cfg = serde_json::json!({
        "seeds": [1],
        "c_grid": [1.0],
        "k_grid": [5],
        "n_queries": 5,
        "gbdt": {"num_trees": 10, "max_depth": 3, "learning_rate": 0.3},
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn writes_the_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), serde_json::json!({}));
    let out = dir.path().join("out");
    let o = leafrep(&[
        "fidelity",
        "--config",
        &cfg,
        "--kernel",
        "leafpath,leafoutput",
        "--methods",
        "klr,teknn",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for rel in ["results.csv", "raw/seed_1.csv", "meta.json"] {
        assert!(out.join(rel).is_file(), "{rel}");
    }
    let plots: Vec<_> = std::fs::read_dir(out.join("plots")).unwrap().collect();
    assert_eq!(plots.len(), 4);

    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2);
    assert!(results.contains("KLR,LeafPath") && results.contains("TEKNN,LeafOutput"));

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["experiment"], "fidelity");
    assert_eq!(meta["config"]["kernels"], serde_json::json!(["LeafPath", "LeafOutput"]));
    assert_eq!(meta["config"]["methods"], serde_json::json!(["TREX-KLR", "teknn"]));
    assert_eq!(meta["config"]["gbdt"]["num_trees"], 10);
    assert_eq!(meta["fingerprints"][0]["seed"], 1);
    assert_eq!(meta["fingerprints"][0]["ensemble"].as_str().unwrap().len(), 64);
    assert_eq!(meta["seed_offsets"]["queries"], 3000);
}

#[test]
fn runtime_keeps_timings_out_of_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), serde_json::json!({"seeds": [0, 1]}));
    let out = dir.path().join("rt");
    let o = leafrep(&["runtime", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let timings = std::fs::read_to_string(out.join("timings.csv")).unwrap();
    assert!(timings.starts_with("method,phase,mean_seconds,sd_seconds,repetitions\n"));
    // 3 methods x 2 phases
    assert_eq!(timings.lines().count(), 7);
    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(!results.contains("seconds"));
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();

    let o = leafrep(&["fidelity", "--data", "/definitely/missing.csv", "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));

    let o = leafrep(&["roar", "--methods", "gbdt_loss", "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not available"));

    let o = leafrep(&["cleaning", "--label-col", "nope", "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));

    let o = leafrep(&["fidelity", "--kernel", "rbf", "--out", out]);
    assert!(!o.status.success());
}

#[test]
fn case_study_without_flips_reports_the_missing_query() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), serde_json::json!({"case_study": {"flip": 0}}));
    let o = leafrep(&["case-study", "--config", &cfg, "--out", dir.path().join("cs").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("misclassified") && err.contains("flip"), "{err}");
}

#[test]
fn generate_data_reproduces_the_bundled_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let o = leafrep(&["generate-data", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(synth::BUNDLED_PATH).unwrap()
    );
}
