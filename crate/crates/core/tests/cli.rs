use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pairwise-opinion");

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN).arg("--out").arg(out).args(args).output().unwrap()
}

fn small_config() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/configs/small.toml").to_string()
}

#[test]
fn unknown_subcommand_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = \"seven\"\n").unwrap();
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "gen-data"]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&cfg, "[generator]\nepsilon = -1.0\n").unwrap();
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "gen-data"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_model_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--config", &small_config(), "predict"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_data_then_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let out = run(dir.path(), &["--config", &cfg, "gen-data"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["corpus.jsonl", "train.jsonl", "val.jsonl", "test.jsonl", "lexicon.tsv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let out = run(dir.path(), &["--config", &cfg, "train", "--variant", "no-such-variant"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["--config", &cfg, "train", "--data", "/nonexistent/train.jsonl"]);
    assert_eq!(out.status.code(), Some(2));

    let broken = dir.path().join("broken.jsonl");
    std::fs::write(&broken, "{not json}\n").unwrap();
    let out = run(dir.path(), &["--config", &cfg, "train", "--data", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
