//! One handler per subcommand. Handlers take fully merged flags and report
//! which files they read and wrote so the caller can write a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use flashdex::corpus::{self, CitationDetector, Corpus, InputFormat};
use flashdex::dense::{
    flat_search, refine_centroids, train_opq, train_pq, CompressedIndex, EmbeddingMatrix, HashEmbedder,
    OpqParams, PqParams, RefineParams, EMBED_MAGIC, QUANT_MAGIC,
};
use flashdex::eval::{self, LatencyReport, Qrels, RunFile};
use flashdex::prune::{self, ClaimScoreTable, PruneMethod, ScoreSource, DEFAULT_THRESHOLD};
use flashdex::sparse::{self, Bm25Params, Granularity, InvertedIndex, SPARSE_MAGIC};
use flashdex::SearchResult;

use crate::args::*;
use crate::error::{CliError, Context, Result};

pub const DEFAULT_DIM: usize = 384;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_TRAIN_ROWS: usize = 65_536;
pub const DEFAULT_OPQ_ITERS: usize = 5;
pub const DEFAULT_TOP_K: usize = 10;

/// Files a handler touched, plus anything it wants printed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub stdout: Option<String>,
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::usage(format!("missing required --{flag}")))
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `text` to `out` if given, otherwise hands it back for stdout.
fn emit(text: String, out: Option<&PathBuf>, outcome: &mut Outcome) -> Result<()> {
    match out {
        Some(path) => {
            write(path, text.as_bytes())?;
            outcome.outputs.push(path.clone());
        }
        None => outcome.stdout = Some(text),
    }
    Ok(())
}

fn parse_flag<T: std::str::FromStr<Err = flashdex::Error>>(value: Option<String>, flag: &str, default: T) -> Result<T> {
    match value {
        Some(v) => v.parse().map_err(|e: flashdex::Error| CliError::usage(format!("--{flag}: {e}"))),
        None => Ok(default),
    }
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Corpus::from_bytes(&read(path)?).context(|| path.display().to_string())
}

fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::from_bytes(&read(path)?).context(|| path.display().to_string())
}

pub fn ingest(a: IngestArgs) -> Result<Outcome> {
    let input = require(a.input, "input")?;
    let out = require(a.out, "out")?;
    let bytes = read(&input)?;
    let corpus = corpus::ingest_bytes(&bytes, InputFormat::Jsonl, &CitationDetector::default())
        .context(|| input.display().to_string())?;
    write(&out, &corpus.to_bytes())?;
    Ok(Outcome { inputs: vec![input], outputs: vec![out], stdout: None })
}

pub fn prune(a: PruneArgs) -> Result<Outcome> {
    let corpus_path = require(a.corpus, "corpus")?;
    let method: PruneMethod = parse_flag(Some(require(a.method, "method")?), "method", PruneMethod::Fusion)?;
    let out = require(a.out, "out")?;
    let threshold = a.threshold.unwrap_or(DEFAULT_THRESHOLD);
    let corpus = load_corpus(&corpus_path)?;
    let mut inputs = vec![corpus_path];
    let table = match &a.scores {
        Some(path) => {
            let t = ClaimScoreTable::parse_tsv(&read_text(path)?).context(|| path.display().to_string())?;
            inputs.push(path.clone());
            Some(t)
        }
        None => None,
    };
    let scores = match &table {
        Some(table) => ScoreSource::Table { table, fallback: !a.strict_scores.unwrap_or(false) },
        None => ScoreSource::Heuristic,
    };
    let pruned = prune::prune(&corpus, method, scores, threshold).context(|| format!("prune {method}"))?;
    let report = prune::report(&corpus, &pruned, method).context(|| format!("prune {method}"))?;
    write(&out, &pruned.to_bytes())?;
    let mut outcome = Outcome { inputs, outputs: vec![out], stdout: None };
    emit(json(&report), a.report.as_ref(), &mut outcome)?;
    Ok(outcome)
}

pub fn embed(a: EmbedArgs) -> Result<Outcome> {
    let out = require(a.out, "out")?;
    match a.mode.as_deref().unwrap_or("hash") {
        "hash" => {}
        other => {
            return Err(CliError::usage(format!(
                "--mode {other:?}: only the hash embedder is built in; model embeddings come from flashdex-embed"
            )))
        }
    }
    let embedder = HashEmbedder::new(a.dim.unwrap_or(DEFAULT_DIM), a.seed.unwrap_or(DEFAULT_SEED))
        .context(|| "embed".to_string())?;
    let (input, emb) = match (a.corpus, a.queries) {
        (Some(path), None) => {
            let granularity = parse_flag(a.granularity, "granularity", Granularity::Sentence)?;
            let corpus = load_corpus(&path)?;
            let emb = embedder.embed_corpus(&corpus, granularity).context(|| path.display().to_string())?;
            (path, emb)
        }
        (None, Some(path)) => {
            let queries = eval::parse_queries(&read_text(&path)?).context(|| path.display().to_string())?;
            let emb = embedder.embed_units(&queries).context(|| path.display().to_string())?;
            (path, emb)
        }
        _ => return Err(CliError::usage("embed takes exactly one of --corpus or --queries")),
    };
    write(&out, &emb.to_bytes())?;
    Ok(Outcome { inputs: vec![input], outputs: vec![out], stdout: None })
}

pub fn index_sparse(a: SparseIndexArgs) -> Result<Outcome> {
    let corpus_path = require(a.corpus, "corpus")?;
    let out = require(a.out, "out")?;
    let granularity = parse_flag(a.granularity, "granularity", Granularity::Sentence)?;
    let corpus = load_corpus(&corpus_path)?;
    let index = InvertedIndex::build(&corpus, granularity).context(|| corpus_path.display().to_string())?;
    write(&out, &index.to_bytes())?;
    Ok(Outcome { inputs: vec![corpus_path], outputs: vec![out], stdout: None })
}

pub fn index_dense(a: DenseIndexArgs) -> Result<Outcome> {
    let emb_path = require(a.embeddings, "embeddings")?;
    let out = require(a.out, "out")?;
    let emb = load_embeddings(&emb_path)?;
    write(&out, &emb.to_bytes())?;
    Ok(Outcome { inputs: vec![emb_path], outputs: vec![out], stdout: None })
}

#[derive(Serialize)]
struct CompressSummary {
    stats: flashdex::dense::CompressionStats,
    layout: flashdex::dense::IndexLayout,
    distortion: Vec<f64>,
    rotation_orthonormality: Option<Vec<f64>>,
}

pub fn compress(a: CompressArgs) -> Result<Outcome> {
    let emb_path = require(a.embeddings, "embeddings")?;
    let out = require(a.out, "out")?;
    let defaults = PqParams::default();
    let pq = PqParams {
        m: a.m.unwrap_or(defaults.m),
        k: a.k.unwrap_or(defaults.k),
        iters: a.iters.unwrap_or(defaults.iters),
        seed: a.seed.unwrap_or(DEFAULT_SEED),
        train_rows: Some(a.train_rows.unwrap_or(DEFAULT_TRAIN_ROWS)),
    };
    let emb = load_embeddings(&emb_path)?;
    let ctx = || format!("compress {}", emb_path.display());
    let (codebook, rotation, distortion, orthonormality) = if a.opq.unwrap_or(false) {
        let params = OpqParams { pq, outer_iters: a.opq_iters.unwrap_or(DEFAULT_OPQ_ITERS), inner_iters: pq.iters };
        let (rotation, codebook, trace) = train_opq(&emb, &params).context(ctx)?;
        (codebook, Some(rotation), trace.objective, Some(trace.orthonormality))
    } else {
        let (codebook, trace) = train_pq(&emb, &pq).context(ctx)?;
        (codebook, None, trace.distortion, None)
    };
    let index = CompressedIndex::build(&emb, codebook, rotation).context(ctx)?;
    let (bytes, layout) = index.to_bytes_with_layout();
    write(&out, &bytes)?;
    let summary = CompressSummary {
        stats: index.compression_stats(),
        layout,
        distortion,
        rotation_orthonormality: orthonormality,
    };
    Ok(Outcome { inputs: vec![emb_path], outputs: vec![out], stdout: Some(json(&summary)) })
}

pub fn refine(a: RefineArgs) -> Result<Outcome> {
    let index_path = require(a.index, "index")?;
    let query_path = require(a.query_emb, "query-emb")?;
    let pairs_path = require(a.pairs, "pairs")?;
    let out = a.out.unwrap_or_else(|| index_path.clone());
    let index = CompressedIndex::from_bytes(&read(&index_path)?).context(|| index_path.display().to_string())?;
    let queries = load_embeddings(&query_path)?;
    let pairs = eval::parse_pairs(&read_text(&pairs_path)?, queries.ids()).context(|| pairs_path.display().to_string())?;
    let mut inputs = vec![index_path, query_path, pairs_path];
    let docs = match a.embeddings {
        Some(path) => {
            let emb = load_embeddings(&path)?;
            inputs.push(path);
            Some(emb)
        }
        None => None,
    };
    let defaults = RefineParams::default();
    let params = RefineParams {
        epochs: a.epochs.unwrap_or(defaults.epochs),
        lr: a.lr.unwrap_or(defaults.lr),
        n_hard_negatives: a.negatives.unwrap_or(defaults.n_hard_negatives),
    };
    let (refined, trace) =
        refine_centroids(&index, &queries, &pairs, &params, docs.as_ref()).context(|| "refine".to_string())?;
    write(&out, &refined.to_bytes())?;
    let mut outcome = Outcome { inputs, outputs: vec![out], stdout: None };
    emit(json(&trace), a.report.as_ref(), &mut outcome)?;
    Ok(outcome)
}

/// Any searchable artifact, recognized by its magic bytes.
pub enum LoadedIndex {
    Sparse(InvertedIndex),
    Flat(EmbeddingMatrix),
    Quantized(CompressedIndex),
}

impl LoadedIndex {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read(path)?;
        let ctx = || path.display().to_string();
        match bytes.get(..4) {
            Some(m) if m == SPARSE_MAGIC => Ok(Self::Sparse(InvertedIndex::from_bytes(&bytes).context(ctx)?)),
            Some(m) if m == EMBED_MAGIC => Ok(Self::Flat(EmbeddingMatrix::from_bytes(&bytes).context(ctx)?)),
            Some(m) if m == QUANT_MAGIC => Ok(Self::Quantized(CompressedIndex::from_bytes(&bytes).context(ctx)?)),
            _ => Err(CliError::Core {
                context: ctx(),
                source: flashdex::Error::Format("not a flashdex index (expected FDXS, FDXE or FDXQ)".into()),
            }),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Sparse(_) => "sparse",
            Self::Flat(_) => "flat",
            Self::Quantized(_) => "quantized",
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Self::Sparse(_) => None,
            Self::Flat(e) => Some(e.d()),
            Self::Quantized(q) => Some(q.codebook().dim()),
        }
    }
}

pub enum QueryInput {
    Text(Vec<(String, String)>),
    Vectors(EmbeddingMatrix),
}

impl QueryInput {
    pub fn qids(&self) -> Vec<&str> {
        match self {
            Self::Text(q) => q.iter().map(|(id, _)| id.as_str()).collect(),
            Self::Vectors(m) => m.ids().iter().map(String::as_str).collect(),
        }
    }
}

/// Loads queries and, for dense indexes given text, hash-embeds them with
/// the index dimension.
fn load_queries(
    index: &LoadedIndex,
    text: Option<PathBuf>,
    vectors: Option<PathBuf>,
    embed_seed: u64,
    inputs: &mut Vec<PathBuf>,
) -> Result<QueryInput> {
    match (text, vectors) {
        (Some(path), None) => {
            let queries = eval::parse_queries(&read_text(&path)?).context(|| path.display().to_string())?;
            inputs.push(path.clone());
            match index.dim() {
                None => Ok(QueryInput::Text(queries)),
                Some(d) => {
                    let embedder = HashEmbedder::new(d, embed_seed).context(|| "embed queries".to_string())?;
                    Ok(QueryInput::Vectors(embedder.embed_units(&queries).context(|| path.display().to_string())?))
                }
            }
        }
        (None, Some(path)) => {
            if index.dim().is_none() {
                return Err(CliError::usage("a sparse index takes --queries text, not --query-emb"));
            }
            let m = load_embeddings(&path)?;
            inputs.push(path);
            Ok(QueryInput::Vectors(m))
        }
        _ => Err(CliError::usage("give exactly one of --queries or --query-emb")),
    }
}

/// Returns a closure searching query `i`.
fn searcher<'a>(
    index: &'a LoadedIndex,
    queries: &'a QueryInput,
    params: Bm25Params,
    k: usize,
) -> impl Fn(usize) -> flashdex::Result<Vec<SearchResult>> + Sync + 'a {
    move |i| match (index, queries) {
        (LoadedIndex::Sparse(idx), QueryInput::Text(q)) => Ok(sparse::search(idx, params, &q[i].1, k)),
        (LoadedIndex::Flat(emb), QueryInput::Vectors(q)) => flat_search(emb, q.row(i), k),
        (LoadedIndex::Quantized(idx), QueryInput::Vectors(q)) => idx.adc_search(q.row(i), k),
        _ => Err(flashdex::Error::Invariant("query representation does not match the index".into())),
    }
}

fn bm25_params(k1: Option<f64>, b: Option<f64>) -> Result<Bm25Params> {
    let d = Bm25Params::default();
    Bm25Params::new(k1.unwrap_or(d.k1), b.unwrap_or(d.b)).map_err(|e| CliError::usage(e.to_string()))
}

pub fn search(a: SearchArgs) -> Result<Outcome> {
    let index_path = require(a.index, "index")?;
    let index = LoadedIndex::load(&index_path)?;
    let mut inputs = vec![index_path];
    let queries = load_queries(&index, a.queries, a.query_emb, a.embed_seed.unwrap_or(DEFAULT_SEED), &mut inputs)?;
    let search = searcher(&index, &queries, bm25_params(a.k1, a.b)?, a.k.unwrap_or(DEFAULT_TOP_K));
    let qids = queries.qids();
    let results: Vec<Vec<SearchResult>> =
        (0..qids.len()).into_par_iter().map(&search).collect::<flashdex::Result<_>>().context(|| "search".into())?;
    let mut run = RunFile::default();
    for (qid, r) in qids.iter().zip(results) {
        run.insert(*qid, r).context(|| "search".into())?;
    }
    let mut outcome = Outcome { inputs, ..Default::default() };
    emit(run.to_trec(a.tag.as_deref().unwrap_or("flashdex")), a.out.as_ref(), &mut outcome)?;
    Ok(outcome)
}

#[derive(Serialize)]
#[serde(untagged)]
enum EvalValue {
    Metric(eval::MetricValue),
    Score(f64),
}

pub fn eval(a: EvalArgs) -> Result<Outcome> {
    let mut report: BTreeMap<String, EvalValue> = BTreeMap::new();
    let mut inputs = Vec::new();
    match (a.run, a.qrels) {
        (Some(run_path), Some(qrels_path)) => {
            let run = RunFile::parse(&read_text(&run_path)?).context(|| run_path.display().to_string())?;
            let qrels = Qrels::parse(&read_text(&qrels_path)?).context(|| qrels_path.display().to_string())?;
            let names = a.metrics.unwrap_or_else(|| "recall@10,ndcg@10".to_string());
            for name in names.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (metric, k) = name
                    .split_once('@')
                    .and_then(|(m, k)| k.parse::<usize>().ok().filter(|&k| k > 0).map(|k| (m, k)))
                    .ok_or_else(|| CliError::usage(format!("--metrics: expected name@k, got {name:?}")))?;
                let value = match metric {
                    "recall" => eval::recall_at_k(&run, &qrels, k),
                    "ndcg" => eval::ndcg_at_k(&run, &qrels, k),
                    _ => return Err(CliError::usage(format!("--metrics: unknown metric {metric:?} (recall|ndcg)"))),
                }
                .context(|| run_path.display().to_string())?;
                report.insert(name.to_string(), EvalValue::Metric(value));
            }
            inputs.extend([run_path, qrels_path]);
        }
        (None, None) => {}
        _ => return Err(CliError::usage("--run and --qrels go together")),
    }
    match (a.predictions, a.gold) {
        (Some(pred_path), Some(gold_path)) => {
            let pred = eval::parse_labels(&read_text(&pred_path)?).context(|| pred_path.display().to_string())?;
            let gold = eval::parse_labels(&read_text(&gold_path)?).context(|| gold_path.display().to_string())?;
            let f1 = eval::weighted_f1(&pred, &gold).context(|| "weighted F1".into())?;
            report.insert("weighted_f1".to_string(), EvalValue::Score(f1));
            inputs.extend([pred_path, gold_path]);
        }
        (None, None) => {}
        _ => return Err(CliError::usage("--predictions and --gold go together")),
    }
    if inputs.is_empty() {
        return Err(CliError::usage("eval needs --run and --qrels, or --predictions and --gold"));
    }
    let mut outcome = Outcome { inputs, ..Default::default() };
    emit(json(&report), a.out.as_ref(), &mut outcome)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct BenchOutput {
    #[serde(flatten)]
    report: LatencyReport,
    index_kind: &'static str,
    /// `(D + log2 n) / (M + log2 n)` for quantized indexes.
    estimated_speedup: Option<f64>,
}

pub fn bench(a: BenchArgs) -> Result<Outcome> {
    let index_path = require(a.index, "index")?;
    let index = LoadedIndex::load(&index_path)?;
    let label = a.label.unwrap_or_else(|| {
        index_path.file_name().map_or_else(|| index_path.display().to_string(), |n| n.to_string_lossy().into_owned())
    });
    let mut inputs = vec![index_path];
    let queries = load_queries(&index, a.queries, a.query_emb, a.embed_seed.unwrap_or(DEFAULT_SEED), &mut inputs)?;
    let search = searcher(&index, &queries, bm25_params(a.k1, a.b)?, a.k.unwrap_or(DEFAULT_TOP_K));
    let n = queries.qids().len();
    // Validate once so timing never sees an error path.
    for i in 0..n {
        search(i).context(|| "bench".into())?;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| CliError::Core {
        context: "bench".into(),
        source: flashdex::Error::Invariant(e.to_string()),
    })?;
    let mut report = pool
        .install(|| eval::bench(&label, n, a.warmup.unwrap_or(10), a.repeats.unwrap_or(100), |i| search(i).unwrap_or_default()))
        .context(|| "bench".into())?;
    if let Some(path) = a.baseline {
        let baseline: LatencyReport = serde_json::from_str(&read_text(&path)?).map_err(|e| CliError::Core {
            context: path.display().to_string(),
            source: flashdex::Error::Format(e.to_string()),
        })?;
        let ratio = eval::speedup(&report, &baseline).context(|| "bench".into())?;
        report.speedup_vs = Some(eval::SpeedupVs { baseline: baseline.label.clone(), ratio });
        inputs.push(path);
    }
    let estimated_speedup = match &index {
        LoadedIndex::Quantized(q) => Some(q.compression_stats().estimated_speedup),
        _ => None,
    };
    let mut outcome = Outcome { inputs, ..Default::default() };
    let output = BenchOutput { report, index_kind: index.kind(), estimated_speedup };
    emit(json(&output), a.out.as_ref(), &mut outcome)?;
    Ok(outcome)
}

pub fn stats(a: StatsArgs) -> Result<Outcome> {
    let path = require(a.path, "path")?;
    let bytes = read(&path)?;
    let ctx = || path.display().to_string();
    let value = match bytes.get(..4) {
        Some(m) if m == corpus::CORPUS_MAGIC => {
            let c = Corpus::from_bytes(&bytes).context(ctx)?;
            serde_json::json!({ "kind": "corpus", "stats": c.stats(), "tombstones": c.tombstones().len() })
        }
        Some(m) if m == SPARSE_MAGIC => {
            let i = InvertedIndex::from_bytes(&bytes).context(ctx)?;
            serde_json::json!({ "kind": "sparse", "n_docs": i.n_docs(), "n_terms": i.n_terms(), "avgdl": i.avgdl() })
        }
        Some(m) if m == EMBED_MAGIC => {
            let e = EmbeddingMatrix::from_bytes(&bytes).context(ctx)?;
            serde_json::json!({ "kind": "embeddings", "n": e.n(), "d": e.d(), "bytes": bytes.len() })
        }
        Some(m) if m == QUANT_MAGIC => {
            let q = CompressedIndex::from_bytes(&bytes).context(ctx)?;
            let (_, layout) = q.to_bytes_with_layout();
            serde_json::json!({
                "kind": "quantized",
                "k": q.codebook().k(),
                "rotation": q.rotation().is_some(),
                "layout": layout,
                "stats": q.compression_stats(),
            })
        }
        _ => {
            return Err(CliError::Core { context: ctx(), source: flashdex::Error::Format("unknown file magic".into()) })
        }
    };
    Ok(Outcome { inputs: vec![path], stdout: Some(json(&value)), ..Default::default() })
}
