use std::path::Path;
use std::process::{Command, Output};

fn cfm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfm"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn synth_train_eval_infer_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = cfm(&["synth", "--out", "data", "--train", "4", "--test-per-kind", "2"], d);
    assert!(o.status.success(), "{o:?}");
    let config = std::fs::read_to_string(d.join("data/desk.toml")).unwrap();
    assert!(config.contains("preset = \"desk\""));

    let o = cfm(&["train", "--config", "data/desk.toml", "--epochs", "2"], d);
    assert!(o.status.success(), "{o:?}");
    assert!(d.join("data/run/synthetic/mapping.cfmm").is_file());
    assert_eq!(std::fs::read_to_string(d.join("data/run/synthetic/loss.csv")).unwrap().lines().count(), 3);

    let o = cfm(&["eval", "--config", "data/desk.toml", "--agg", "sum", "--sigma", "2"], d);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert!(out.starts_with("category,I-AUROC,P-AUROC,AUPRO@30,AUPRO@10,AUPRO@5,AUPRO@1\n"), "{out}");
    assert!(out.contains("\nmean,"));
    assert!(d.join("data/run/report.json").is_file());

    let o = cfm(&["infer", "--config", "data/desk.toml", "--output", "maps", "--checkpoints", "data/run"], d);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).lines().count(), 8);
    assert!(d.join("maps/synthetic/maps/good_000.png").is_file());

    let o = cfm(&["bench", "--config", "data/desk.toml", "--limit", "3"], d);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("Base (layer 12)"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(cfm(&["synth", "--out", "data", "--train", "2", "--test-per-kind", "1"], d).status.success());

    // configuration errors
    let o = cfm(&["eval", "--config", "data/desk.toml", "--sigma", "0"], d);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(cfm(&["train", "--config", "data/desk.toml", "--layer", "13"], d).status.code(), Some(2));
    assert_eq!(cfm(&["train", "--config", "data/desk.toml", "--few-shot", "0"], d).status.code(), Some(2));
    assert_eq!(cfm(&["eval", "--agg", "median"], d).status.code(), Some(2));
    assert_eq!(cfm(&["eval", "--config", "missing.toml"], d).status.code(), Some(2));
    std::fs::write(d.join("typo.toml"), "sigmaa = 2.0\n").unwrap();
    assert_eq!(cfm(&["eval", "--config", "typo.toml"], d).status.code(), Some(2));

    // data errors
    let o = cfm(&["eval", "--config", "data/desk.toml"], d);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mapping.cfmm"));
    std::fs::create_dir(d.join("empty")).unwrap();
    assert_eq!(cfm(&["convert", "empty"], d).status.code(), Some(3));
}

#[test]
fn convert_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(cfm(&["synth", "--out", "data", "--train", "1", "--test-per-kind", "1"], d).status.success());
    let o = cfm(&["convert", "data", "--out", "conv"], d);
    assert!(o.status.success(), "{o:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("conv/manifest.json")).unwrap()).unwrap();
    let samples = manifest["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 5);
    assert!(samples.iter().any(|s| s["label"] == "anomalous" && s["defect"] == "multimodal_only"));
}
