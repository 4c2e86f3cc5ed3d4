//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 configuration error, 3 backend
//! error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::chunking::{default_separators, split_document, ChunkProfile};
use crate::config::{ConfigError, EmbeddingBackendKind, LlmBackendKind, RunConfig};
use crate::corpus::{CaseFacts, CollectionKind, CorpusError, CorpusStore};
use crate::embedding::{embed_batch, EmbeddingError, EmbeddingProvider, HttpEmbedder, StubEmbedder};
use crate::evaluation::{EvalError, ExternalScorer, MetricReport, PercentilePoint, PercentileSpec, PercentileTable};
use crate::generation::{GenerationError, HttpLlmBackend, LlmBackend, PromptTemplateId, ScriptedBackend};
use crate::pipeline::{Pipeline, PipelineError, PipelineSettings};
use crate::retrieval::{
    manifest_lines, CollectionGroup, EmbedOptions, PipelineTopology, RetrievalError, RetrievalIndexes, TopologyKind,
};
use crate::text::{TokenCounter, WordPunctCounter};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("backend error: {0}")]
    Backend(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::Remote { .. } => CliError::Backend(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Config(_) | RetrievalError::MissingIndex { .. } => CliError::Config(e.to_string()),
            RetrievalError::Embedding(inner) => inner.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Budget { .. } => CliError::Input(e.to_string()),
            GenerationError::Backend { .. } => CliError::Backend(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Retrieval(e) => e.into(),
            PipelineError::Generation(e) => e.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::External(_) => CliError::Backend(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "jurisrag", version, about = "Hybrid legal retrieval, judgment prompting and evaluation")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Store directory (store.path).
    #[arg(long, global = true, value_name = "DIR")]
    pub store: Option<PathBuf>,
    /// Retrieval topology (retrieval.topology).
    #[arg(long, global = true)]
    pub topology: Option<TopologyKind>,
    /// Index seed (seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Prompt template (llm.template).
    #[arg(long, global = true)]
    pub template: Option<PromptTemplateId>,
    /// Scripted completions file (llm.completions).
    #[arg(long, global = true, value_name = "FILE")]
    pub completions: Option<PathBuf>,
    /// Remote embedding endpoint; selects the remote embedder.
    #[arg(long, global = true, value_name = "URL")]
    pub embed_endpoint: Option<String>,
    /// Remote LLM endpoint; selects the remote LLM backend.
    #[arg(long, global = true, value_name = "URL")]
    pub llm_endpoint: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Jsonl,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and store line-delimited documents.
    Ingest {
        #[arg(long)]
        kind: CollectionKind,
        /// Exit 0 even when some records are rejected.
        #[arg(long)]
        allow_partial: bool,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Dump the chunks of stored documents.
    Chunk {
        #[arg(long)]
        kind: Option<CollectionKind>,
        #[arg(long)]
        max_tokens: Option<usize>,
        #[arg(long)]
        overlap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Embed one text per input line.
    Embed {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build or describe retrieval indexes.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Retrieve statutes and precedents for a facts file.
    Search {
        facts: PathBuf,
        #[arg(long = "group")]
        groups: Vec<CollectionGroup>,
        /// Metadata predicate KEY=VALUE; repeatable.
        #[arg(long = "filter", value_parser = parse_filter)]
        filters: Vec<(String, String)>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run retrieval, prompting, completion and parsing for a facts file.
    Pipeline {
        facts: PathBuf,
        #[arg(long = "filter", value_parser = parse_filter)]
        filters: Vec<(String, String)>,
        /// Manifest destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score candidate lines against reference lines.
    Eval {
        candidates: PathBuf,
        references: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: ReportFormat,
        #[arg(long, default_value = "model")]
        label: String,
        /// External semantic scorer command and arguments.
        #[arg(long, num_args = 1.., allow_hyphen_values = true)]
        scorer: Vec<String>,
    },
    /// Token-count percentiles per field of JSONL inputs, or per collection of the store.
    Stats {
        inputs: Vec<PathBuf>,
        #[arg(long = "field")]
        fields: Vec<String>,
        /// Comma-separated points, e.g. `50,90,99,max`.
        #[arg(long)]
        percentiles: Option<String>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum IndexAction {
    /// Build indexes for the configured topology.
    Build {
        /// Build all three topologies.
        #[arg(long)]
        all: bool,
    },
    /// Print index statistics.
    Inspect,
}

fn parse_filter(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected KEY=VALUE, got {s:?}")),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

fn lines_text<I: IntoIterator<Item = String>>(lines: I) -> String {
    lines.into_iter().map(|l| l + "\n").collect()
}

impl Cli {
    fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(store) = &self.store {
            config.store.path = store.clone();
        }
        if let Some(t) = self.topology {
            config.retrieval.topology = t;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(t) = self.template {
            config.llm.template = t;
        }
        if let Some(c) = &self.completions {
            config.llm.completions = Some(c.clone());
            config.llm.backend = LlmBackendKind::Scripted;
        }
        if let Some(e) = &self.embed_endpoint {
            config.embedding.endpoint = Some(e.clone());
            config.embedding.backend = EmbeddingBackendKind::Remote;
        }
        if let Some(e) = &self.llm_endpoint {
            config.llm.endpoint = Some(e.clone());
            config.llm.backend = LlmBackendKind::Remote;
        }
        config.validate()?;
        Ok(config)
    }
}

fn embedder(config: &RunConfig) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    match config.embedding.backend {
        EmbeddingBackendKind::Stub => Ok(Box::new(StubEmbedder)),
        EmbeddingBackendKind::Remote => HttpEmbedder::from_config(&config.embedding.client_config())
            .map(|e| Box::new(e) as Box<dyn EmbeddingProvider>)
            .ok_or_else(|| CliError::Config("remote embedding backend without an endpoint".into())),
    }
}

fn llm(config: &RunConfig) -> Result<Box<dyn LlmBackend>, CliError> {
    match config.llm.backend {
        LlmBackendKind::Scripted => match &config.llm.completions {
            Some(path) => Ok(Box::new(ScriptedBackend::load(path).map_err(|e| CliError::Config(e.to_string()))?)),
            None => Ok(Box::new(ScriptedBackend::default())),
        },
        LlmBackendKind::Remote => HttpLlmBackend::from_config(&config.llm.client_config())
            .map(|b| Box::new(b) as Box<dyn LlmBackend>)
            .ok_or_else(|| CliError::Config("remote llm backend without an endpoint".into())),
    }
}

fn embed_options(config: &RunConfig) -> EmbedOptions {
    EmbedOptions {
        batch_size: config.embedding.batch_size,
        max_in_flight: config.embedding.max_in_flight,
    }
}

fn read_facts(path: &Path, filters: &[(String, String)]) -> Result<CaseFacts, CliError> {
    Ok(CaseFacts::new(&read(path)?)?.with_filters(filters.to_vec()))
}

fn backend_label<T: serde::Serialize>(kind: T) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "jurisrag: {e}");
            e.code()
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = cli.resolve_config()?;
    let counter = WordPunctCounter;
    match &cli.command {
        Command::Ingest {
            kind,
            allow_partial,
            files,
        } => {
            let mut store = CorpusStore::open(&config.store.path)?;
            let mut rejected = 0;
            for file in files {
                let report = store.ingest_jsonl(&read(file)?, *kind)?;
                let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let rejects: Vec<_> = report
                    .rejected
                    .iter()
                    .map(|(line, reason)| json!({"line": line + 1, "reason": reason}))
                    .collect();
                rejected += report.rejected.len();
                let line = json!({"record": "ingest", "file": name, "kind": kind, "accepted": report.accepted, "rejected": rejects});
                emit(&None, &format!("{line}\n"), stdout)?;
            }
            store.compact()?;
            if rejected > 0 && !allow_partial {
                return Err(CliError::Input(format!("{rejected} record(s) rejected")));
            }
            Ok(())
        }
        Command::Chunk {
            kind,
            max_tokens,
            overlap,
            out,
        } => {
            let store = CorpusStore::open(&config.store.path)?;
            let spec = config.topology().chunk_spec();
            let profile = ChunkProfile::new(
                max_tokens.unwrap_or(spec.max_tokens),
                overlap.unwrap_or(spec.overlap_tokens),
                default_separators(),
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            let mut text = String::new();
            for doc in store.documents().filter(|d| kind.is_none_or(|k| d.kind == k)) {
                for chunk in split_document(doc, &profile, &counter) {
                    text.push_str(&serde_json::to_string(&chunk).expect("chunk serializes"));
                    text.push('\n');
                }
            }
            emit(out, &text, stdout)
        }
        Command::Embed { input, out } => {
            let texts: Vec<String> = read(input)?.lines().map(str::to_string).collect();
            let provider = embedder(&config)?;
            let vectors = embed_batch(
                provider.as_ref(),
                &texts,
                config.embedding.batch_size,
                config.embedding.max_in_flight,
            )?;
            let text = lines_text(
                vectors
                    .iter()
                    .enumerate()
                    .map(|(i, v)| json!({"index": i, "vector": v.values()}).to_string()),
            );
            emit(out, &text, stdout)
        }
        Command::Index { action } => match action {
            IndexAction::Build { all } => {
                let store = CorpusStore::open(&config.store.path)?;
                let provider = embedder(&config)?;
                let kinds = if *all {
                    TopologyKind::ALL.to_vec()
                } else {
                    vec![config.retrieval.topology]
                };
                for kind in kinds {
                    let topology = PipelineTopology::preset(kind).with_seed(config.seed);
                    let indexes =
                        RetrievalIndexes::build(&store, topology, provider.as_ref(), &counter, embed_options(&config))?;
                    indexes.save(&config.index_dir(kind))?;
                    let chunks: BTreeMap<&str, usize> = CollectionGroup::ALL
                        .iter()
                        .map(|g| (g.as_str(), indexes.group(*g).map_or(0, |i| i.chunks().len())))
                        .collect();
                    let line = json!({"record": "index", "topology": kind, "chunks": chunks});
                    emit(&None, &format!("{line}\n"), stdout)?;
                }
                Ok(())
            }
            IndexAction::Inspect => {
                let kind = config.retrieval.topology;
                let indexes = RetrievalIndexes::load(&config.index_dir(kind), &CollectionGroup::ALL)?;
                let mut text = String::new();
                for group in CollectionGroup::ALL {
                    let Some(index) = indexes.group(group) else { continue };
                    let dense = index
                        .dense()
                        .map(|d| json!({"kind": d.kind_name(), "vectors": d.len(), "metric": d.metric()}));
                    let lexical = index.lexical().map(|l| {
                        json!({"segments": l.segment_count(), "avgdl": l.avgdl(), "vocabulary": l.vocabulary_size()})
                    });
                    let line = json!({
                        "record": "index",
                        "topology": kind,
                        "params": indexes.topology(),
                        "group": group,
                        "chunks": index.chunks().len(),
                        "dense": dense,
                        "lexical": lexical,
                    });
                    text.push_str(&format!("{line}\n"));
                }
                emit(&None, &text, stdout)
            }
        },
        Command::Search {
            facts,
            groups,
            filters,
            out,
        } => {
            let store = CorpusStore::open(&config.store.path)?;
            let facts = read_facts(facts, filters)?;
            let groups = if groups.is_empty() {
                config.retrieval.groups.clone()
            } else {
                groups.clone()
            };
            let indexes = RetrievalIndexes::load(&config.index_dir(config.retrieval.topology), &groups)?;
            let provider = embedder(&config)?;
            let sets = indexes.run(&facts, &store, provider.as_ref(), &groups, &config.retrieval.relevance)?;
            emit(out, &lines_text(manifest_lines(indexes.topology(), &sets)), stdout)
        }
        Command::Pipeline { facts, filters, out } => {
            let store = CorpusStore::open(&config.store.path)?;
            let facts = read_facts(facts, filters)?;
            let indexes = RetrievalIndexes::load(&config.index_dir(config.retrieval.topology), &config.retrieval.groups)?;
            let provider = embedder(&config)?;
            let backend = llm(&config)?;
            let pipeline = Pipeline {
                indexes: &indexes,
                store: &store,
                embedder: provider.as_ref(),
                backend: backend.as_ref(),
                counter: &counter,
                settings: PipelineSettings {
                    groups: config.retrieval.groups.clone(),
                    relevance: config.retrieval.relevance.clone(),
                    template: config.llm.template,
                    inference: config.inference,
                    embedding_backend: backend_label(config.embedding.backend),
                    llm_backend: backend_label(config.llm.backend),
                },
            };
            let run = pipeline.run(&facts);
            emit(out, &run.manifest(), stdout)?;
            run.result.map(|_| ()).map_err(|f| f.error.into())
        }
        Command::Eval {
            candidates,
            references,
            out,
            format,
            label,
            scorer,
        } => {
            let c: Vec<String> = read(candidates)?.lines().map(str::to_string).collect();
            let r: Vec<String> = read(references)?.lines().map(str::to_string).collect();
            let mut report = MetricReport::score(&c, &r)?;
            if !scorer.is_empty() {
                let columns = ExternalScorer {
                    command: scorer.clone(),
                }
                .run(&c, &r)?;
                report.attach_external(columns)?;
            }
            let text = match format {
                ReportFormat::Jsonl => report.to_jsonl(),
                ReportFormat::Table => report.to_table(label),
            };
            emit(out, &text, stdout)
        }
        Command::Stats {
            inputs,
            fields,
            percentiles,
            json,
        } => {
            let spec = match percentiles {
                Some(list) => PercentileSpec::new(
                    list.split(',')
                        .map(|p| p.parse::<PercentilePoint>())
                        .collect::<Result<_, _>>()?,
                )?,
                None => PercentileSpec::default(),
            };
            let columns = if inputs.is_empty() {
                store_columns(&CorpusStore::open(&config.store.path)?, &counter)
            } else {
                jsonl_columns(inputs, fields, &counter)?
            };
            let table = PercentileTable::build(spec, &columns)?;
            let text = if *json { table.to_jsonl() } else { table.to_text() };
            emit(&None, &text, stdout)
        }
    }
}

fn store_columns(store: &CorpusStore, counter: &dyn TokenCounter) -> Vec<(String, Vec<u64>)> {
    CollectionKind::ALL
        .iter()
        .map(|&kind| {
            let counts: Vec<u64> = store.documents_of(kind).map(|d| counter.count(&d.text) as u64).collect();
            (kind.as_str().to_string(), counts)
        })
        .filter(|(_, counts)| !counts.is_empty())
        .collect()
}

fn jsonl_columns(inputs: &[PathBuf], fields: &[String], counter: &dyn TokenCounter) -> Result<Vec<(String, Vec<u64>)>, CliError> {
    let mut order: Vec<String> = fields.to_vec();
    let mut columns: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for path in inputs {
        for (i, line) in read(path)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let record: serde_json::Map<String, serde_json::Value> = serde_json::from_str(line)
                .map_err(|e| CliError::Input(format!("{} line {}: {e}", path.display(), i + 1)))?;
            for (key, value) in &record {
                let Some(text) = value.as_str() else { continue };
                if fields.is_empty() && !order.contains(key) {
                    order.push(key.clone());
                }
                if order.contains(key) {
                    columns.entry(key.clone()).or_default().push(counter.count(text) as u64);
                }
            }
        }
    }
    order
        .into_iter()
        .map(|name| match columns.remove(&name) {
            Some(v) => Ok((name, v)),
            None => Err(CliError::Input(format!("no string values for field {name:?}"))),
        })
        .collect()
}
