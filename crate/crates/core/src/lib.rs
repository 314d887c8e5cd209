//! Topic-class recovery from sentence embeddings.
//!
//! The crate ingests labeled text corpora, vectorizes them with TF-IDF or
//! imports precomputed embeddings (emb-v1 files), and scores two classifiers
//! on them: a k-means cluster classifier that labels each cluster with its
//! majority class, and a multinomial logistic-regression baseline.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the command-line tool.

pub mod cluster_classifier;
pub mod corpus;
pub mod embedding_store;
pub mod error;
pub mod kmeans;
pub mod logreg;
pub mod matrix;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod tfidf;

pub use cluster_classifier::{majority_map, ClusterClassMap, ClusterModel};
pub use corpus::{Corpus, Example, IngestStats};
pub use embedding_store::{load_embeddings, save_embeddings, EmbeddingMatrix};
pub use error::{Error, Result};
pub use kmeans::{kmeans_fit, kmeanspp_init, KMeansConfig, KMeansResult};
pub use logreg::{train_logreg, LogRegConfig, LogRegModel};
pub use matrix::{DenseMatrix, RowMatrix, SparseMatrix};
pub use metrics::{accuracy, angular_distance, cosine_similarity, macro_f1, EvalReport};
pub use report::{evaluate, render_tables, run_evaluate, EvalConfig, EvalMode, Method, Normalize};
pub use scalar::Scalar;
pub use tfidf::{tokenize, TfidfModel};

pub type Dense64 = DenseMatrix<f64>;
pub type Dense32 = DenseMatrix<f32>;
pub type Sparse64 = SparseMatrix<f64>;
pub type Sparse32 = SparseMatrix<f32>;
pub type Tfidf64 = TfidfModel<f64>;
pub type KMeansResult64 = KMeansResult<f64>;
pub type ClusterModel64 = ClusterModel<f64>;
pub type LogRegModel64 = LogRegModel<f64>;
pub type LogRegModel32 = LogRegModel<f32>;
