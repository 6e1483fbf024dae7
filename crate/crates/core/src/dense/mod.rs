//! Dense retrieval: exact flat search, product quantization (optionally
//! with an learned rotation), asymmetric-distance search over codes and
//! ranking-supervised centroid refinement.
//!
//! Scores are inner products throughout.

mod embed;
mod index;
mod kmeans;
mod matrix;
mod opq;
mod pq;
mod refine;
mod stats;

pub use embed::HashEmbedder;
pub use index::{CompressedIndex, IndexLayout, QUANT_MAGIC, QUANT_VERSION};
pub use kmeans::{kmeans, kmeans_from, KMeansResult};
pub use matrix::{dot, flat_search, EmbeddingMatrix, EMBED_MAGIC, EMBED_VERSION};
pub use opq::{procrustes, train_opq, OpqParams, OpqTrace};
pub use pq::{encode, reconstruct, train_pq, Codes, PqCodebook, PqParams, PqTrace, Rotation};
pub use refine::{pairwise_logistic_loss, refine_centroids, Negatives, RefineParams, RefineTrace, TrainPair};
pub use stats::{compression_stats, CompressionStats};
