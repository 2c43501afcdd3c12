//! Hybrid patent similarity.
//!
//! Two patents are compared along two axes:
//!
//! * **semantic distance** (SD): mean-pooled token embeddings of title and
//!   abstract, cosine similarity mapped onto `[0, 1]`;
//! * **technological distance** (TD): Jaccard index of the patents'
//!   section/class/subclass IPC keys.
//!
//! They combine into `sdtd = (td + 1) · sd / 2`. The [`eval`] module
//! adjudicates expert panel ratings and correlates scores against them.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the CLI uses.

pub mod corpus;
pub mod eval;
pub mod hybrid;
pub mod ipc;
pub mod scalar;
pub mod semantic;
pub mod synthetic;
pub mod techdist;

pub use corpus::{
    corpus_stats, load_corpus, load_pairs, Corpus, CorpusError, CorpusStats, Ingest, PairLoad, PatentDocument,
    PatentPair,
};
pub use eval::{
    adjudicate, pearson, spearman, spearman_with, RatingRecord, RatingScore, Route, ScoreField, SpearmanMode,
};
pub use hybrid::{sdtd, ScoreError, Scorer};
pub use ipc::{normalize_code_set, parse_ipc, IpcCode, IpcKey3};
pub use scalar::Scalar;
pub use semantic::{CacheProvider, EmbeddingProvider, RemoteProvider, StubProvider, VectorCache};
pub use techdist::{jaccard_td, TechProfile};

pub type SimilarityReport = hybrid::SimilarityReport<f64>;
pub type SimilarityReportF32 = hybrid::SimilarityReport<f32>;
pub type MeanVector = semantic::MeanVector<f64>;
pub type MeanVectorF32 = semantic::MeanVector<f32>;
pub type EmbeddingMatrix = semantic::EmbeddingMatrix<f32>;
pub type AdjudicatedScore = eval::AdjudicatedScore<f64>;
pub type EvalSummary = eval::EvalSummary<f64>;
