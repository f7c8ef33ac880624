//! Helpers shared by the binary-level tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{TimeZone, Utc};
use mscbench_core::corpus::{class_query, render_feed, AtomEntry, CachedTransport};
use mscbench_core::store::RunStore;
use mscbench_core::TopClass;

pub const E2E_ID: &str = "2403.00000";

pub const DIALOGUE: &str = "Based on the title and abstract, the primary classification is 22E50 \
    (Representations of Lie and linear algebraic groups over local fields). \
    Secondary classifications: 11F27 (Theta series; Weil representation), \
    20G25 (Linear algebraic groups over local fields), \
    11F70 (Representation-theoretic methods; automorphic representations).";

pub fn mscbench(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mscbench"))
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("MSCBENCH_TAXONOMY")
        .env_remove("MSCBENCH_STORE")
        .env_remove("OPENAI_API_KEY")
        .env("MSCBENCH_ARXIV_URL", "http://127.0.0.1:9/unreachable")
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// Puts one synthetic class-22 preprint into the arXiv cache of `store`.
pub fn seed_arxiv_cache(store: &Path) {
    let store = RunStore::open(store).unwrap();
    let entry = AtomEntry::new(
        E2E_ID,
        "Theta lifts for p-adic metaplectic groups",
        "We compute theta lifts of supercuspidal representations of p-adic \
         metaplectic groups and relate them to automorphic forms.",
        Utc.with_ymd_and_hms(2024, 3, 28, 12, 0, 0).unwrap(),
        "11F27, 22E50, 11F70",
    );
    let query = class_query(TopClass::new(22).unwrap(), 50);
    CachedTransport::store(&store.arxiv_cache_dir(), &query, &render_feed(&[entry])).unwrap();
}

pub fn write_mock_script(dir: &Path) -> PathBuf {
    let path = dir.join("mock.json");
    let script = serde_json::json!({
        "model": "mock",
        "replies": { E2E_ID: [DIALOGUE] }
    });
    std::fs::write(&path, script.to_string()).unwrap();
    path
}

/// Runs sample, classify, evaluate and report offline; returns the report.
pub fn offline_pipeline(store: &Path, scratch: &Path) -> String {
    seed_arxiv_cache(store);
    let script = write_mock_script(scratch);
    let steps: [Vec<&str>; 3] = [
        vec!["sample", "--offline", "--classes", "22"],
        vec![
            "classify",
            "--provider",
            "mock",
            "--mock-script",
            script.to_str().unwrap(),
        ],
        vec!["evaluate"],
    ];
    for step in &steps {
        let out = mscbench(store, step);
        assert_eq!(code(&out), 0, "{step:?}: {}", stderr(&out));
    }
    let out = mscbench(store, &["report", "--format", "csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    stdout(&out)
}
