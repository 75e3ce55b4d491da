//! Multi-modal adversarial autoencoders and comparison models for
//! implicit-feedback recommendation, together with the evaluation protocol
//! used to compare them: time-axis splits, minimum-occurrence pruning,
//! leave-one-out corruption and mean reciprocal rank.
//!
//! The crate is organised bottom-up:
//!
//! * [`corpus`] loads `doc/item` and `doc/year/title` files, splits on the
//!   time axis and prunes the item vocabulary.
//! * [`linalg`] holds the CSR and dense matrix kernels plus a randomized
//!   truncated SVD.
//! * [`textfeat`] turns titles into TF-IDF vectors and TF-IDF weighted
//!   embedded bag-of-words vectors.
//! * [`neural`] is a small hand-differentiated MLP stack with Adam.
//! * [`recommenders`] implements item co-occurrence, SVD, a title-only MLP,
//!   an undercomplete autoencoder and the adversarial autoencoder.
//! * [`eval`] corrupts test rows, computes reciprocal ranks and runs whole
//!   experiments; [`config`] parses the flat experiment configuration.

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod neural;
pub mod recommenders;
pub mod textfeat;

pub use corpus::{Corpus, Document, PruningReport, SplitCorpus};
pub use error::{Error, Result};
pub use eval::{CorruptedTestSet, ExperimentConfig, RunResult};
pub use linalg::{DenseMatrix, SparseBinaryMatrix, SparseMatrix, SvdFactors};
pub use recommenders::{ModelKind, Modality, Recommender, ScoreMatrix};
pub use textfeat::{EmbeddingTable, TfidfModel, TitleFeatures};
