//! Run the three retrieval topologies over the fixture corpus and print the
//! judgment manifest of each.
//!
//! cargo run --example hybrid_pipeline

use jurisrag::corpus::{CaseFacts, CollectionKind, CorpusStore};
use jurisrag::embedding::StubEmbedder;
use jurisrag::generation::{InferenceParams, PromptTemplateId, ScriptedBackend};
use jurisrag::pipeline::{Pipeline, PipelineSettings};
use jurisrag::retrieval::{CollectionGroup, EmbedOptions, PipelineTopology, RelevancePolicy, RetrievalIndexes, TopologyKind};
use jurisrag::text::WordPunctCounter;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = env!("CARGO_MANIFEST_DIR");
    let mut store = CorpusStore::in_memory();
    for kind in [
        CollectionKind::CentralActs,
        CollectionKind::StateActs,
        CollectionKind::SupremeCourtJudgments,
        CollectionKind::HighCourtJudgments,
    ] {
        store.ingest_jsonl(&std::fs::read_to_string(format!("{root}/fixtures/corpus/{}.jsonl", kind.as_str()))?, kind)?;
    }
    let facts = CaseFacts::new(&std::fs::read_to_string(format!("{root}/fixtures/facts.txt"))?)?;
    let backend = ScriptedBackend::load(std::path::Path::new(&format!("{root}/fixtures/completions.jsonl")))?;

    for (kind, template) in [
        (TopologyKind::DenseOnly, PromptTemplateId::DeepSeekR1),
        (TopologyKind::StagedHybrid, PromptTemplateId::Qwen35),
        (TopologyKind::ParallelHybrid, PromptTemplateId::Phi4),
    ] {
        let indexes = RetrievalIndexes::build(
            &store,
            PipelineTopology::preset(kind),
            &StubEmbedder,
            &WordPunctCounter,
            EmbedOptions::default(),
        )?;
        let pipeline = Pipeline {
            indexes: &indexes,
            store: &store,
            embedder: &StubEmbedder,
            backend: &backend,
            counter: &WordPunctCounter,
            settings: PipelineSettings {
                groups: CollectionGroup::ALL.to_vec(),
                relevance: RelevancePolicy::default(),
                template,
                inference: InferenceParams::default(),
                embedding_backend: "stub".into(),
                llm_backend: "scripted".into(),
            },
        };
        let run = pipeline.run(&facts);
        println!("== {} ==", kind.as_str());
        match &run.result {
            Ok(j) => println!("decision {:?}, parse {:?}", j.decision, j.parse_quality),
            Err(f) => println!("failed at {:?}: {}", f.stage, f.error),
        }
        println!("{} manifest records", run.lines.len());
    }
    Ok(())
}
