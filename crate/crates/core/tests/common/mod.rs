#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const KINDS: [&str; 4] = ["central_acts", "state_acts", "sc_judgments", "hc_judgments"];

/// (topology, template) pairs of the golden runs.
pub const GOLDEN_RUNS: [(&str, &str); 3] = [
    ("dense_only", "deepseek_r1"),
    ("staged_hybrid", "qwen35"),
    ("parallel_hybrid", "phi4"),
];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn jurisrag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jurisrag"))
        .args(args)
        .env_remove("JURISRAG_EMBED_ENDPOINT")
        .env_remove("JURISRAG_LLM_ENDPOINT")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// Ingest the fixture corpus into `<dir>/store`.
pub fn ingest_fixtures(dir: &Path) -> String {
    let store = dir.join("store").display().to_string();
    for kind in KINDS {
        let file = fixtures().join("corpus").join(format!("{kind}.jsonl"));
        let out = jurisrag(&["--store", &store, "ingest", "--kind", kind, file.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    store
}

/// Ingest the fixture corpus and build indexes for every topology.
pub fn indexed_store(dir: &Path) -> String {
    let store = ingest_fixtures(dir);
    let out = jurisrag(&["--store", &store, "index", "build", "--all"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    store
}

pub fn golden_pipeline(store: &str, topology: &str, template: &str) -> Output {
    let facts = fixtures().join("facts.txt");
    let completions = fixtures().join("completions.jsonl");
    jurisrag(&[
        "--store",
        store,
        "--topology",
        topology,
        "--template",
        template,
        "--completions",
        completions.to_str().unwrap(),
        "pipeline",
        facts.to_str().unwrap(),
    ])
}
