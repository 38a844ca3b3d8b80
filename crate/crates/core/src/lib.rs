//! Per-predicate link prediction for knowledge graphs.
//!
//! Every predicate `p` of a knowledge graph induces a bipartite subgraph of
//! subjects and objects. For each such subgraph this crate learns a latent
//! factor model scored as `x(s, o) = U_s · V_o + b_o`, fitted with Bayesian
//! Personalized Ranking (pairwise, observed-over-unobserved) by plain SGD.
//!
//! Around the model sit the pieces needed to run a full experiment:
//!
//! - [`kg`]: TSV triple ingestion and per-predicate bipartite extraction.
//! - [`model`]: the embedding model, scoring, logistic link and top-N ranking.
//! - [`bpr`]: training-sample generation and the BPR gradient step.
//! - [`baselines`]: random, most-popular and pointwise matrix factorization.
//! - [`eval`]: repeated leave-one-out splits with HR@N, ARHR and AUC.
//! - [`topology`]: density, average degree, transitivity and OLS fits.
//! - [`synth`]: deterministic synthetic graph families.
//! - [`pipeline`]: experiment configuration, driver and summary report.

pub mod baselines;
pub mod bpr;
pub mod error;
pub mod eval;
pub mod kg;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod topology;

pub use error::{Error, Result};
pub use kg::{extract_bipartite, parse_triples, Adjacency, KnowledgeGraph, PredicateBipartiteGraph, Triple};
pub use model::{EmbeddingModel, HyperParams};
