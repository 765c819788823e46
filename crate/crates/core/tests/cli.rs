use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn catcgl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catcgl")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) {
    let out = catcgl(&["synth", "--out", path(dir), "--blocks", "4", "--nodes-per-block", "20", "--dim", "8", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_twice_gives_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    for run in ["a", "b"] {
        let out = catcgl(&[
            "run", "--dataset", path(&data), "--out", path(&tmp.path().join(run)),
            "--epochs", "30", "--encoders", "10", "--condense-hidden", "32", "--condense-output", "32",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("bwt="));
    }
    for f in ["perf_matrix.csv", "metrics.json"] {
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap());
    }
}

#[test]
fn config_file_and_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"scheme": "finetune", "budget_ratio": 0.02, "trainer": {"epochs": 3}}"#).unwrap();
    let out = catcgl(&["run", "--config", path(&cfg), "--seed", "9", "--il-mode", "task_il", "--print-config"]);
    assert!(out.status.success());
    let resolved: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(resolved["scheme"], "finetune");
    assert_eq!(resolved["seed"], 9);
    assert_eq!(resolved["il_mode"], "task_il");
    assert_eq!(resolved["trainer"]["epochs"], 3);
    assert_eq!(resolved["trainer"]["hidden"], 256);
    assert_eq!(resolved["condense"]["encoders"], 200);
}

#[test]
fn metrics_subcommand_recomputes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("m.csv");
    fs::write(&csv, "0.9\n0.6,0.8\n").unwrap();
    let out = catcgl(&["metrics", path(&csv)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["bwt"][0], serde_json::Value::Null);
    assert!((v["bwt"][1].as_f64().unwrap() + 0.3).abs() < 1e-12);
    assert!((v["ap"][1].as_f64().unwrap() - 0.7).abs() < 1e-12);
}

#[test]
fn condense_and_embed_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let cond = tmp.path().join("cond");
    let out = catcgl(&["condense", "--dataset", path(&data), "--budget", "8", "--out", path(&cond), "--encoders", "5", "--hidden", "16", "--output", "16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(cond.join("nodes.tsv")).unwrap().lines().count(), 8);
    assert_eq!(fs::read_to_string(cond.join("edges.tsv")).unwrap(), "");

    for (src, rows) in [(&data, 80), (&cond, 8)] {
        let emb = tmp.path().join("emb.csv");
        let out = catcgl(&["embed", "--dataset", path(src), "--out", path(&emb), "--hidden", "16", "--output", "5"]);
        assert!(out.status.success());
        let text = fs::read_to_string(&emb).unwrap();
        assert_eq!(text.lines().count(), rows);
        assert!(text.lines().all(|l| l.split(',').count() == 5));
    }
}

#[test]
fn gradcheck_subcommand_passes() {
    let out = catcgl(&["gradcheck", "--seeds", "3"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("PASS").count(), 8);
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["run".into(), "--dataset".into(), path(&tmp.path().join("missing")).into()],
        vec!["run".into(), "--budget-ratio".into(), "2".into()],
        vec!["metrics".into(), path(&tmp.path().join("none.csv")).into()],
        vec!["synth".into(), "--out".into(), path(&tmp.path().join("s")).into(), "--blocks".into(), "20".into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = catcgl(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error: "));
    }
}
