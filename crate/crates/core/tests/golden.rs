mod common;

use common::*;

#[test]
fn pipeline_manifests_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let store = indexed_store(dir.path());
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (topology, template) in GOLDEN_RUNS {
        let out = golden_pipeline(&store, topology, template);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let manifest = stdout(&out);
        let path = golden_dir().join(format!("{topology}.jsonl"));
        if update {
            std::fs::write(&path, &manifest).unwrap();
            continue;
        }
        let expected = std::fs::read_to_string(&path).expect("golden file; run with UPDATE_GOLDEN=1 to create");
        assert!(manifest == expected, "{topology} manifest differs from {}", path.display());
    }
}

#[test]
fn golden_manifests_are_well_formed() {
    for (topology, template) in GOLDEN_RUNS {
        let text = std::fs::read_to_string(golden_dir().join(format!("{topology}.jsonl"))).unwrap();
        let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        let kinds: Vec<&str> = records.iter().map(|r| r["record"].as_str().unwrap()).collect();
        assert_eq!(kinds, ["config", "retrieval", "retrieval", "prompt", "completion", "judgment", "status"]);
        assert_eq!(records[0]["topology"], topology);
        assert_eq!(records[1]["group"], "statutes");
        assert_eq!(records[2]["group"], "precedents");
        assert_eq!(records[3]["template"], template);
        assert_eq!(records[4]["source"], "scripted");
        assert_eq!(records[6]["status"], "ok");
        assert!(!text.contains(env!("CARGO_MANIFEST_DIR")));
    }
}
