use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eegpipe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eegpipe"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EEGSIG_LOG")
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = eegpipe(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) {
    fs::write(dir.join("c.json"), body).unwrap();
}

#[test]
fn generate_fixture_writes_manifest_and_trials() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "generate-fixture",
        "--classes",
        "5",
        "--per-class",
        "20",
        "--seed",
        "7",
        "--out",
    ];
    ok(&[&args[..], &["a"]].concat(), d);
    ok(&[&args[..], &["b"]].concat(), d);
    let names: Vec<String> = fs::read_dir(d.join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"manifest.json".to_string()));
    assert_eq!(names.iter().filter(|n| n.ends_with(".csv")).count(), 100);
    for n in &names {
        assert_eq!(
            fs::read(d.join("a").join(n)).unwrap(),
            fs::read(d.join("b").join(n)).unwrap(),
            "{n}"
        );
    }
    ok(&["validate", "--input", "a", "--out", "v"], d);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("v/validation.json")).unwrap()).unwrap();
    assert_eq!(report["ok"], true);
}

#[test]
fn subcommands_compose_to_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "generate-fixture",
            "--classes",
            "3",
            "--per-class",
            "4",
            "--seed",
            "5",
            "--out",
            "data",
        ],
        d,
    );
    write_config(
        d,
        r#"{"input": "data", "classifier": {"kind": "mlp", "hyperparameters": {"epochs": 50}},
            "evaluation": {"cv_folds": 3}, "seed": 9}"#,
    );
    ok(&["pipeline", "--config", "c.json", "--out", "full"], d);
    ok(&["preprocess", "--config", "c.json", "--out", "steps"], d);
    ok(
        &[
            "features",
            "--config",
            "c.json",
            "--input",
            "steps/clean",
            "--out",
            "steps/features.csv",
        ],
        d,
    );
    ok(
        &[
            "train",
            "--config",
            "c.json",
            "--features",
            "steps/features.csv",
            "--out",
            "steps/model.json",
        ],
        d,
    );
    ok(
        &[
            "evaluate",
            "--config",
            "c.json",
            "--features",
            "steps/features.csv",
            "--model",
            "steps/model.json",
            "--out",
            "steps/metrics.json",
        ],
        d,
    );
    for name in ["features.csv", "model.json", "metrics.json"] {
        assert_eq!(
            fs::read(d.join("full").join(name)).unwrap(),
            fs::read(d.join("steps").join(name)).unwrap(),
            "{name}"
        );
    }
    for t in 0..12 {
        let n = format!("ica/trial_{t:03}.json");
        assert_eq!(
            fs::read(d.join("full").join(&n)).unwrap(),
            fs::read(d.join("steps").join(&n)).unwrap()
        );
    }

    // features straight from the config preprocess in memory and match too
    ok(
        &["features", "--config", "c.json", "--out", "direct.csv"],
        d,
    );
    assert_eq!(
        fs::read(d.join("direct.csv")).unwrap(),
        fs::read(d.join("full/features.csv")).unwrap()
    );
    let header = fs::read_to_string(d.join("direct.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("c3.delta.mean,c3.delta.variance,"));
    assert!(header.ends_with(",o2.gamma.band_power,label"));

    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("full/report.json")).unwrap()).unwrap();
    assert_eq!(report["features"]["rows"], 12);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "generate-fixture",
            "--classes",
            "2",
            "--per-class",
            "3",
            "--out",
            "data",
        ],
        d,
    );
    write_config(d, r#"{"input": "data", "preprocess": {}, "seed": 1}"#);
    ok(&["features", "--config", "c.json", "--out", "f.csv"], d);
    ok(
        &[
            "train",
            "--config",
            "c.json",
            "--features",
            "f.csv",
            "--out",
            "m1.json",
        ],
        d,
    );
    ok(
        &[
            "train",
            "--config",
            "c.json",
            "--seed",
            "2",
            "--features",
            "f.csv",
            "--out",
            "m2.json",
        ],
        d,
    );
    let m1: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("m1.json")).unwrap()).unwrap();
    let m2: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("m2.json")).unwrap()).unwrap();
    assert_eq!(
        (m1["seed"].as_u64(), m2["seed"].as_u64()),
        (Some(1), Some(2))
    );
    assert_ne!(m1["model"], m2["model"]);
}

#[test]
fn failures_exit_nonzero_with_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, r#"{"input": "missing/manifest.json"}"#);
    let out = eegpipe(&["pipeline", "--config", "c.json", "--out", "o"], d);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("error: load stage failed"),
        "{}",
        stderr(&out)
    );

    write_config(d, r#"{"input": "x", "classifier": {"kind": "forest"}}"#);
    let out = eegpipe(&["pipeline", "--config", "c.json"], d);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("config stage failed"),
        "{}",
        stderr(&out)
    );

    let out = eegpipe(&["pipeline", "--frobnicate"], d);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
}

#[test]
fn log_level_comes_from_flag_or_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "generate-fixture",
        "--classes",
        "2",
        "--per-class",
        "1",
        "--out",
        "data",
    ];
    ok(&args, d);
    write_config(
        d,
        r#"{"input": "data", "preprocess": {}, "evaluation": {"cv_folds": null}}"#,
    );
    let chatty = ok(&["pipeline", "--config", "c.json", "--out", "o"], d);
    assert!(stderr(&chatty).contains("INFO"));
    let quiet = ok(
        &[
            "pipeline",
            "--config",
            "c.json",
            "--out",
            "o",
            "--log-level",
            "error",
        ],
        d,
    );
    assert!(!stderr(&quiet).contains("INFO"));
    let env = Command::new(env!("CARGO_BIN_EXE_eegpipe"))
        .args([
            "pipeline",
            "--config",
            "c.json",
            "--out",
            "o",
            "--log-level",
            "info",
        ])
        .current_dir(d)
        .env("EEGSIG_LOG", "error")
        .output()
        .unwrap();
    assert!(env.status.success());
    assert!(!stderr(&env).contains("INFO"));
}
