//! Subcommand flags. Every field is optional so a config section can fill
//! whatever the command line leaves out.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

/// Declares a flag struct whose fields are all `Option`s and implements
/// [`crate::config::Flags`] for it.
macro_rules! flags {
    ($(#[$meta:meta])* $name:ident { $( $(#[$fmeta:meta])* $field:ident : $ty:ty ),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
        #[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
        pub struct $name {
            /// Read defaults for these flags from this section of a TOML config file
            #[arg(long)]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            $( $(#[$fmeta])* pub $field: Option<$ty>, )*
        }

        impl crate::config::Flags for $name {
            const FIELDS: &'static [&'static str] = &[$(stringify!($field)),*];

            fn config(&self) -> Option<&std::path::Path> {
                self.config.as_deref()
            }

            fn or(self, fallback: Self) -> Self {
                Self { config: self.config, $( $field: self.$field.or(fallback.$field), )* }
            }

            fn rebase(&mut self, dir: &std::path::Path) {
                $( crate::config::Rebase::rebase(&mut self.$field, dir); )*
            }
        }
    };
}

flags!(IngestArgs {
    /// JSONL dump, one document per line
    #[arg(long)]
    input: PathBuf,
    /// Corpus store to write
    #[arg(long)]
    out: PathBuf,
});

flags!(PruneArgs {
    /// Corpus store to prune
    #[arg(long)]
    corpus: PathBuf,
    /// fe (claim score), ce (citations) or fu (union)
    #[arg(long)]
    method: String,
    /// TSV of doc_id, sent_idx, score; without it the heuristic scorer is used
    #[arg(long)]
    scores: PathBuf,
    /// Fact-extraction score threshold [default: 0.5]
    #[arg(long)]
    threshold: f64,
    /// Fail on sentences missing from the score file instead of falling back to the heuristic
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    strict_scores: bool,
    /// Pruned corpus store to write
    #[arg(long)]
    out: PathBuf,
    /// JSON prune report to write
    #[arg(long)]
    report: PathBuf,
});

flags!(EmbedArgs {
    /// Corpus store to embed
    #[arg(long)]
    corpus: PathBuf,
    /// Query TSV (qid, text) to embed instead of a corpus
    #[arg(long)]
    queries: PathBuf,
    /// Embedder; only "hash" is built in
    #[arg(long)]
    mode: String,
    /// Embedding dimension [default: 384]
    #[arg(long)]
    dim: usize,
    /// Hash seed [default: 7]
    #[arg(long)]
    seed: u64,
    /// Indexing unit: doc or sent [default: sent]
    #[arg(long)]
    granularity: String,
    /// Embedding file to write
    #[arg(long)]
    out: PathBuf,
});

flags!(SparseIndexArgs {
    /// Corpus store to index
    #[arg(long)]
    corpus: PathBuf,
    /// Indexing unit: doc or sent [default: sent]
    #[arg(long)]
    granularity: String,
    /// Index file to write
    #[arg(long)]
    out: PathBuf,
});

flags!(DenseIndexArgs {
    /// Embedding file to index
    #[arg(long)]
    embeddings: PathBuf,
    /// Flat index file to write
    #[arg(long)]
    out: PathBuf,
});

flags!(CompressArgs {
    /// Embedding file to compress
    #[arg(long)]
    embeddings: PathBuf,
    /// Number of codebooks [default: 96]
    #[arg(short = 'M', long = "codebooks")]
    #[serde(rename = "codebooks")]
    m: usize,
    /// Centroids per codebook, at most 256 [default: 256]
    #[arg(short = 'K', long = "centroids")]
    #[serde(rename = "centroids")]
    k: usize,
    /// Learn a rotation before quantizing
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    opq: bool,
    /// Rotation/codebook alternations when --opq is set [default: 5]
    #[arg(long)]
    opq_iters: usize,
    /// k-means iterations [default: 25]
    #[arg(long)]
    iters: usize,
    /// Train on a seeded sample of at most this many rows [default: 65536]
    #[arg(long)]
    train_rows: usize,
    /// Training seed [default: 7]
    #[arg(long)]
    seed: u64,
    /// Compressed index file to write
    #[arg(long)]
    out: PathBuf,
});

flags!(RefineArgs {
    /// Compressed index to refine
    #[arg(long)]
    index: PathBuf,
    /// Query embeddings; row ids are qids
    #[arg(long)]
    query_emb: PathBuf,
    /// TSV of qid, positive id and optional comma-separated negatives
    #[arg(long)]
    pairs: PathBuf,
    /// Document embeddings aligned with the index; enables re-encoding between epochs
    #[arg(long)]
    embeddings: PathBuf,
    /// Epochs [default: 5]
    #[arg(long)]
    epochs: usize,
    /// Learning rate [default: 0.05]
    #[arg(long)]
    lr: f32,
    /// Hard negatives mined per pair [default: 5]
    #[arg(long)]
    negatives: usize,
    /// Refined index to write
    #[arg(long)]
    out: PathBuf,
    /// JSON loss trace to write
    #[arg(long)]
    report: PathBuf,
});

flags!(SearchArgs {
    /// Sparse (FDXS), flat (FDXE) or compressed (FDXQ) index
    #[arg(long)]
    index: PathBuf,
    /// Query TSV (qid, text); dense indexes hash-embed the text
    #[arg(long)]
    queries: PathBuf,
    /// Precomputed query embeddings for dense indexes
    #[arg(long)]
    query_emb: PathBuf,
    /// Results per query [default: 10]
    #[arg(short = 'k', long = "top-k")]
    #[serde(rename = "top-k")]
    k: usize,
    /// BM25 k1 [default: 1.2]
    #[arg(long)]
    k1: f64,
    /// BM25 b [default: 0.75]
    #[arg(long)]
    b: f64,
    /// Hash seed used to embed query text for dense indexes [default: 7]
    #[arg(long)]
    embed_seed: u64,
    /// Run tag written in the last TREC column [default: flashdex]
    #[arg(long)]
    tag: String,
    /// TREC run file to write
    #[arg(long)]
    out: PathBuf,
});

flags!(EvalArgs {
    /// TREC run file
    #[arg(long)]
    run: PathBuf,
    /// TREC qrels file
    #[arg(long)]
    qrels: PathBuf,
    /// Comma-separated list such as recall@10,ndcg@10 [default: recall@10,ndcg@10]
    #[arg(long)]
    metrics: String,
    /// Predicted labels TSV (id, label) for weighted F1
    #[arg(long)]
    predictions: PathBuf,
    /// Gold labels TSV (id, label) for weighted F1
    #[arg(long)]
    gold: PathBuf,
    /// JSON file to write; stdout otherwise
    #[arg(long)]
    out: PathBuf,
});

flags!(BenchArgs {
    /// Index to time
    #[arg(long)]
    index: PathBuf,
    /// Query TSV (qid, text)
    #[arg(long)]
    queries: PathBuf,
    /// Precomputed query embeddings for dense indexes
    #[arg(long)]
    query_emb: PathBuf,
    /// Untimed rounds over all queries [default: 10]
    #[arg(long)]
    warmup: usize,
    /// Timed repeats per query [default: 100]
    #[arg(long)]
    repeats: usize,
    /// Latency report JSON to compare against
    #[arg(long)]
    baseline: PathBuf,
    /// Results per query [default: 10]
    #[arg(short = 'k', long = "top-k")]
    #[serde(rename = "top-k")]
    k: usize,
    /// BM25 k1 [default: 1.2]
    #[arg(long)]
    k1: f64,
    /// BM25 b [default: 0.75]
    #[arg(long)]
    b: f64,
    /// Hash seed used to embed query text for dense indexes [default: 7]
    #[arg(long)]
    embed_seed: u64,
    /// Report label [default: index file name]
    #[arg(long)]
    label: String,
    /// Latency report JSON to write; stdout otherwise
    #[arg(long)]
    out: PathBuf,
});

flags!(StatsArgs {
    /// Any flashdex artifact
    #[arg(long)]
    path: PathBuf,
});

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Pipeline config file
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Build a BM25 inverted index
    Sparse(SparseIndexArgs),
    /// Store embeddings as a flat exact-search index
    Dense(DenseIndexArgs),
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a JSONL dump into a corpus store
    Ingest(IngestArgs),
    /// Prune a corpus to fact or cited sentences
    Prune(PruneArgs),
    /// Embed a corpus or query file
    Embed(EmbedArgs),
    /// Build an index
    #[command(subcommand)]
    Index(IndexCommand),
    /// Train a product quantizer and encode embeddings
    Compress(CompressArgs),
    /// Refine centroids with a pairwise ranking loss
    Refine(RefineArgs),
    /// Search an index and write a TREC run
    Search(SearchArgs),
    /// Score a run against qrels, or labels with weighted F1
    Eval(EvalArgs),
    /// Time searches against an index
    Bench(BenchArgs),
    /// Print statistics for any artifact
    Stats(StatsArgs),
    /// Run the stages listed in a pipeline config
    Run(RunArgs),
}

/// Evidence retrieval for fact-checking pipelines.
#[derive(Debug, Parser)]
#[command(name = "flashdex", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}
