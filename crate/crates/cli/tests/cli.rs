use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use audiobook_core::orchestrator::{collection_stats, BookStatus, Manifest};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn audiobook(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_audiobook")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_then_stats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mini = fixtures().join("corpus-mini");
    let config = fixtures().join("pipeline.toml");
    let o = audiobook(&["build", "--config", s(&config), "--corpus", s(&mini), "--out", s(&out), "--k", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let manifest_file = out.join("manifest.v1");
    let m = Manifest::load(&manifest_file).unwrap();
    assert!(m.header.complete);
    assert!(m.entries.iter().all(|e| e.status == BookStatus::Done));

    let o = audiobook(&["stats", "--manifest", s(&manifest_file)]);
    assert!(o.status.success());
    let st = collection_stats(&m);
    assert_eq!(stdout(&o), format!("books_done\t{}\ntotal_hours\t{}\n", st.books_done, st.total_hours));

    let o = audiobook(&["build", "--config", s(&config), "--corpus", s(&mini), "--out", s(&out), "--k", "1", "--resume"]);
    assert_eq!(o.status.code(), Some(0));
    // a different k no longer matches the manifest
    let o = audiobook(&["build", "--config", s(&config), "--corpus", s(&mini), "--out", s(&out), "--k", "2", "--resume"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn a_failed_book_gives_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixtures().join("pipeline.toml");
    let poison = fixtures().join("corpus-poison");
    let o = audiobook(&["build", "--config", s(&config), "--corpus", s(&poison), "--out", s(dir.path()), "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty-99"));
}

#[test]
fn features_cluster_plot() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixtures().join("corpus");
    let feats = dir.path().join("features.tsv");
    let model = dir.path().join("model.kmeans");
    let svg = dir.path().join("plot.svg");

    assert!(audiobook(&["features", "--corpus", s(&corpus), "--out", s(&feats), "--min-df", "2"]).status.success());
    let o = audiobook(&["cluster", "--features", s(&feats), "--out", s(&model), "--k", "4", "--seed", "42"]);
    assert!(o.status.success());
    let lines = stdout(&o);
    assert_eq!(lines.lines().count(), 14);
    assert!(lines.lines().all(|l| l.split('\t').nth(1).is_some_and(|c| c.parse::<usize>().unwrap() < 4)));

    assert!(audiobook(&["plot", "--features", s(&feats), "--model", s(&model), "--out", s(&svg)]).status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    assert_eq!(text.matches("<circle").count(), 14);

    let o = audiobook(&["cluster", "--features", s(&feats), "--out", s(&model), "--k", "20"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn normalize_and_script_one_book() {
    let dir = tempfile::tempdir().unwrap();
    let book = fixtures().join("corpus/modern-06.html");
    let clean = dir.path().join("clean.html");
    let o = audiobook(&["normalize", "--input", s(&book), "--out", s(&clean)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["characters_removed"].as_u64().unwrap() > 0);

    let script = dir.path().join("script.json");
    let ssml = dir.path().join("ssml");
    let o = audiobook(&["script", "--input", s(&clean), "--out", s(&script), "--ssml-dir", s(&ssml)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let n = std::fs::read_dir(&ssml).unwrap().count();
    assert!(n > 0);

    let o = audiobook(&["normalize", "--input", s(&book), "--out", s(&clean), "--ruleset", "no-such-rules"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(audiobook(&["build", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(audiobook(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(audiobook(&["build", "--workers", "0"]).status.code(), Some(2));
    let o = audiobook(&["--version"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("audiobook "));
}
