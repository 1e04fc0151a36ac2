//! Corpus handling, BM25, and the parametric scorers that stand in for the
//! reader and retriever networks.

mod bm25;
mod corpus;
mod hybrid;
mod model;
mod tokenize;

pub use bm25::{Bm25Index, DEFAULT_B, DEFAULT_K1};
pub use corpus::{read_queries, write_queries, Collection, Corpus, Document, McqaRecord};
pub use hybrid::{beta_correction, hybrid_posterior_score, DEFAULT_HYBRID_TAU};
pub use model::{BoundScorer, CountingScorer, PairScorer, QueryRecord, ScoreKind, ScoreModel};
pub use tokenize::tokenize;
