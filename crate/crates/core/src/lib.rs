//! Evidence retrieval for fact-checking pipelines.
//!
//! A corpus of sentences is ingested from JSONL ([`corpus`]), optionally
//! pruned down to check-worthy or cited sentences ([`prune`]), and indexed
//! either lexically with BM25 ([`sparse`]) or densely with exact and
//! product-quantized inner-product search ([`dense`]). [`eval`] scores runs
//! against relevance judgments and times search procedures.

mod codec;
pub mod corpus;
pub mod dense;
pub mod error;
pub mod eval;
pub mod prune;
pub mod search;
pub mod sparse;
pub mod text;

pub use error::{Error, Result};
pub use search::SearchResult;
