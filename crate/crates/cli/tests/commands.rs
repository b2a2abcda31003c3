use std::path::Path;
use std::process::Command;

fn emosim(out: &Path, args: &[&str]) -> serde_json::Value {
    let o = Command::new(env!("CARGO_BIN_EXE_emosim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn eval_nlg_scores_identical_text() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("nlg.jsonl");
    std::fs::write(
        &input,
        concat!(
            r#"{"pred": "i want a cheap place in the centre", "ref": "i want a cheap place in the centre", "actions": [["inform","restaurant","pricerange","cheap"],["inform","restaurant","area","centre"]]}"#,
            "\n",
            r#"{"pred": "book it for me please", "ref": ["book it for me please"]}"#,
            "\n"
        ),
    )
    .unwrap();
    let s = emosim(dir.path(), &["eval-nlg", "--input", input.to_str().unwrap()]);
    assert_eq!(s["bleu"], 100.0);
    assert_eq!(s["ser"], 0.0);
}

#[test]
fn eval_emotion_on_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pred.jsonl");
    std::fs::write(
        &input,
        "{\"pred\": \"neutral\", \"ref\": \"neutral\"}\n{\"pred\": \"satisfied\", \"ref\": \"satisfied\"}\n",
    )
    .unwrap();
    let s = emosim(dir.path(), &["eval-emotion", "--predictions", input.to_str().unwrap()]);
    assert_eq!(s["emotion_f1"], 1.0);
}

#[test]
fn ingest_then_fit_writes_weights() {
    let dir = tempfile::tempdir().unwrap();
    emosim(dir.path(), &["ingest-corpus", "--synthetic", "20", "--fit"]);
    for f in ["corpus.json", "personas.json", "emotion_weights.json", "fit_losses.csv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn policy_from_training_drives_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"ppo": {"epochs": 2, "turns_per_epoch": 40, "seeds": 1}}"#).unwrap();
    let c = cfg.to_str().unwrap();
    emosim(dir.path(), &["--config", c, "train-policy"]);
    let policy = dir.path().join("policy_seed0.json");
    let s = emosim(
        dir.path(),
        &["--config", c, "simulate", "--system", "policy", "--policy", policy.to_str().unwrap(), "--dialogues", "5"],
    );
    assert_eq!(s["dialogues"], 5);
}

#[test]
fn unknown_variant_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_emosim"))
        .args(["simulate", "--variant", "nope"])
        .output()
        .unwrap();
    assert!(!o.status.success());
}
