//! Effectiveness metrics, TREC-style exchange files and a latency harness.

mod bench;
mod metrics;
mod trec;

pub use bench::{bench, speedup, LatencyReport, SpeedupVs};
pub use metrics::{ndcg_at_k, recall_at_k, weighted_f1, MetricValue};
pub use trec::{parse_labels, parse_pairs, parse_queries, Qrels, RunFile};
