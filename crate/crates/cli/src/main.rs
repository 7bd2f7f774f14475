mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clir_core::bench::IndexAccess;
use clir_core::lexical::Field;
use clir_core::rerank::Difficulty;

/// A problem with the command line itself. Exits with status 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

const FORMATS: &str = "\
File formats:
  corpus, queries          JSONL, one record per line
  qrels                    TREC qrels: query_id 0 doc_id grade
  runs                     TREC run: query_id Q0 doc_id rank score tag, '#' header lines
  BM25 index               CLXI v1
  embeddings               CLRE v1 matrix plus a newline-separated ids file
  HNSW index               CLRH v1
  metric report            JSONL v1 (header, pair, macro, micro records)
  candidates, requests,
  responses, train pairs   JSONL

Configuration: --config FILE (TOML). Flags override config values, which
override built-in defaults. Relative paths in the config resolve against
the config file's directory.

Exit status: 0 success, 1 usage error, 2 data or validation error,
3 internal error.";

#[derive(Parser)]
#[command(name = "clir", version, about = "Cross-lingual retrieval experimentation pipeline", after_long_help = FORMATS)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Top-level seed; recorded in every output header.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Bm25,
    Dense,
    Ann,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, deduplicate, rebalance, truncate and sample a collection.
    Ingest(IngestArgs),
    /// Build a BM25 inverted index.
    IndexBm25(IndexBm25Args),
    /// Build an HNSW index over document embeddings.
    IndexHnsw(IndexHnswArgs),
    /// First-stage retrieval into a TREC run.
    Retrieve(RetrieveArgs),
    /// Top-k re-ranking candidates with gold injection.
    MakeCandidates(MakeCandidatesArgs),
    /// Export (query, document, label) training pairs.
    ExportNegatives(ExportNegativesArgs),
    /// Re-rank candidates with externally computed scores.
    ApplyScores(ApplyScoresArgs),
    /// Recall@k and nDCG@k per language pair.
    Evaluate(EvaluateArgs),
    /// Same-language rate and retrieved-language distribution.
    AnalyzeBias(AnalyzeBiasArgs),
    /// Correlate typological similarity with per-pair recall.
    AnalyzeLingsim(AnalyzeLingsimArgs),
    /// Interleaved exact vs HNSW latency protocol.
    BenchLatency(BenchLatencyArgs),
    /// Hashed bag-of-words embeddings, no model required.
    ToyEmbed(ToyEmbedArgs),
    /// Write a synthetic two-script bilingual collection.
    SynthFixture(SynthFixtureArgs),
}

#[derive(Args)]
pub struct CollectionArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
}

#[derive(Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: CollectionArgs,
    /// Dataset name; a preset name (clirmatrix, mmarco, large-scale) also selects its languages.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Comma-separated language codes accepted in the input.
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    /// Drop duplicate texts and spread documents evenly over the languages.
    #[arg(long)]
    pub rebalance: bool,
    /// Token budget per document; 0 disables truncation.
    #[arg(long, default_value_t = clir_core::corpus::DEFAULT_TRUNCATION_BUDGET)]
    pub truncate: usize,
    /// Sample this many queries per language pair.
    #[arg(long)]
    pub queries_per_pair: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct IndexBm25Args {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<Field>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DocEmbeddingArgs {
    #[arg(long)]
    pub doc_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub doc_ids: Option<PathBuf>,
}

#[derive(Args)]
pub struct QueryEmbeddingArgs {
    #[arg(long)]
    pub query_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub query_ids: Option<PathBuf>,
}

#[derive(Args)]
pub struct HnswArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub ef_construction: Option<usize>,
    /// Search beam; defaults to max(50, 2k).
    #[arg(long)]
    pub ef: Option<usize>,
}

#[derive(Args)]
pub struct IndexHnswArgs {
    #[command(flatten)]
    pub docs: DocEmbeddingArgs,
    #[command(flatten)]
    pub hnsw: HnswArgs,
    /// Model name stored in the index.
    #[arg(long, default_value = "unknown")]
    pub model: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RetrieveArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// BM25 (CLXI) or HNSW (CLRH) index.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[command(flatten)]
    pub docs: DocEmbeddingArgs,
    #[command(flatten)]
    pub query_vecs: QueryEmbeddingArgs,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub ef: Option<usize>,
    #[arg(long)]
    pub tag: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct MakeCandidatesArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write cross-encoder scoring requests (needs corpus and queries).
    #[arg(long)]
    pub requests: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExportNegativesArgs {
    #[command(flatten)]
    pub input: CollectionArgs,
    #[arg(long)]
    pub mode: Difficulty,
    /// First-stage run; required for hard negatives.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Negatives per query.
    #[arg(long, default_value_t = 1)]
    pub negatives: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ApplyScoresArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    /// Scoring responses (JSONL).
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value = "rerank")]
    pub tag: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[command(flatten)]
    pub input: CollectionArgs,
    /// Cutoffs, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 100])]
    pub k: Vec<usize>,
    /// Recall counts grades strictly above this.
    #[arg(long, default_value_t = 0)]
    pub relevance_threshold: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AnalyzeBiasArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[command(flatten)]
    pub input: CollectionArgs,
    #[arg(long, default_value_t = clir_core::analysis::DEFAULT_BIAS_DEPTH)]
    pub depth: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AnalyzeLingsimArgs {
    /// Metric report written by `evaluate`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub typology: Option<PathBuf>,
    /// Recall cutoff taken from the report.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub include_same_language: bool,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BenchLatencyArgs {
    #[command(flatten)]
    pub input: CollectionArgs,
    #[command(flatten)]
    pub docs: DocEmbeddingArgs,
    #[command(flatten)]
    pub query_vecs: QueryEmbeddingArgs,
    #[command(flatten)]
    pub hnsw: HnswArgs,
    #[arg(long)]
    pub k: Option<usize>,
    /// Pairs used for normalization; defaults to the dataset preset or the observed pairs.
    #[arg(long)]
    pub pair_count: Option<usize>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, default_value = "per-pair")]
    pub access: IndexAccess,
    /// Directory for per-pair index files; defaults to `<out>.indexes`.
    #[arg(long)]
    pub work_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ToyEmbedArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// `token<TAB>canonical` aliases hashed to the same bucket.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<Field>,
    /// Writes docs.emb, docs.ids, queries.emb, queries.ids.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct SynthFixtureArgs {
    #[arg(long, default_value_t = 300)]
    pub docs_per_language: usize,
    #[arg(long, default_value_t = 40)]
    pub queries_per_pair: usize,
    #[arg(long, default_value_t = 2000)]
    pub vocabulary: usize,
    #[arg(long, default_value_t = 30)]
    pub doc_length: usize,
    #[arg(long, default_value_t = 5)]
    pub query_length: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<clir_core::Error>() {
            return if e.is_internal() { 3 } else { 2 };
        }
        if cause.is::<toml::de::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
