use std::path::Path;
use std::process::{Command, Output};

fn reflect(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reflect"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn reflect")
}

fn stdout_json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is json")
}

#[test]
fn unknown_subcommand_and_flag_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = reflect(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = reflect(dir.path(), &["gradcheck", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failure_is_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let o = reflect(dir.path(), &["eval", "--data", "missing", "--predictor", "mean"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(v["error"]["kind"].is_string());
    assert!(v["error"]["message"].as_str().unwrap().contains("missing"));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"dataset": {"scenez": 3}}"#).unwrap();
    let o = reflect(dir.path(), &["--config", "c.json", "gradcheck"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(v["error"].is_object());
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&reflect(dir.path(), &["--seed", "5", "gradcheck"]));
    assert_eq!(v["all_passed"], true);
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let v = stdout_json(&reflect(d, &["--seed", "3", "--out", "data", "gen-data", "--scenes", "10", "--views", "6"]));
    assert_eq!(v["scenes"], 10);

    let train = |out: &str| {
        stdout_json(&reflect(
            d,
            &[
                "--seed", "3", "--out", out, "train", "--data", "data", "--model", "grouplet-fast",
                "--minibatches", "6", "--eval-every", "3", "--precision", "f64",
            ],
        ))
    };
    let a = train("run_a");
    let b = train("run_b");
    assert_eq!(a["final_val_rmse"], b["final_val_rmse"]);
    assert_eq!(
        std::fs::read(d.join("run_a/final.ckpt")).unwrap(),
        std::fs::read(d.join("run_b/final.ckpt")).unwrap()
    );

    let e = stdout_json(&reflect(d, &["--out", "rep", "eval", "--data", "data", "--checkpoint", "run_a/final.ckpt"]));
    assert!(e["rmse"].as_f64().unwrap().is_finite());
    assert!(d.join("rep/eval.json").exists());

    let oracle = stdout_json(&reflect(d, &["eval", "--data", "data", "--predictor", "oracle", "--split", "train"]));
    assert!(oracle["rmse"].as_f64().unwrap() < 1e-9);

    let s = stdout_json(&reflect(
        d,
        &["--out", "sw", "sweep", "--data", "data", "--checkpoint", "run_a/final.ckpt", "--views", "2,6", "--voxels", "1,20"],
    ));
    assert_eq!(s["views"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(d.join("sw/coverage.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let r = stdout_json(&reflect(d, &["--out", "rn", "render", "--data", "data", "--checkpoint", "run_a/final.ckpt"]));
    assert!(Path::new(&d.join(r["image"].as_str().unwrap())).exists());

    let rep = stdout_json(&reflect(d, &["report", "--checkpoint", "run_a/final.ckpt"]));
    assert_eq!(rep["counts_match"], true);
    assert_eq!(rep["param_count"], 274_245);

    let ab = stdout_json(&reflect(
        d,
        &["--out", "ab", "ablate-ec", "--data", "data", "--with", "run_a/final.ckpt", "--without", "run_b/final.ckpt"],
    ));
    assert_eq!(ab["with_ec"]["mean_scale_error"], ab["without_ec"]["mean_scale_error"]);
    assert!(d.join("ab/ablation.json").exists());
}

#[test]
fn ablate_trains_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    stdout_json(&reflect(d, &["--seed", "1", "--out", "data", "gen-data", "--scenes", "8", "--views", "5"]));
    let v = stdout_json(&reflect(
        d,
        &["--seed", "1", "--out", "ab", "ablate-ec", "--data", "data", "--model", "grouplet-fast", "--minibatches", "3"],
    ));
    assert!(v["with_ec"]["lambda"].as_f64().unwrap() > 0.0);
    assert_eq!(v["without_ec"]["lambda"], 0.0);
    assert!(d.join("ab/with_ec/final.ckpt").exists());
    assert!(d.join("ab/without_ec/final.ckpt").exists());
}
