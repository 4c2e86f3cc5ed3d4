//! Ingest the fixture corpus into an in-memory store and filter by metadata.
//!
//! cargo run --example ingest_filter

use jurisrag::corpus::{CollectionKind, CorpusStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus");
    let mut store = CorpusStore::in_memory();
    for kind in [
        CollectionKind::CentralActs,
        CollectionKind::StateActs,
        CollectionKind::SupremeCourtJudgments,
        CollectionKind::HighCourtJudgments,
    ] {
        let text = std::fs::read_to_string(format!("{corpus}/{}.jsonl", kind.as_str()))?;
        let report = store.ingest_jsonl(&text, kind)?;
        println!("{:<14} accepted {} rejected {}", kind.as_str(), report.accepted, report.rejected.len());
    }

    let filters = vec![("state".to_string(), "Uttar Pradesh".to_string())];
    for doc in store.filter(&filters) {
        println!("{} ({})", doc.id, doc.kind.as_str());
    }
    Ok(())
}
