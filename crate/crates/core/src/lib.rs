//! Fairness-aware representation learning for heterogeneous information
//! networks (HINs).
//!
//! The crate covers three families of debiasing methods for node
//! embeddings and the measurement machinery needed to compare them:
//!
//! * [`metapath`]: meta-path guided random walks, with a group-aware
//!   transition kernel at career→user steps;
//! * [`skipgram`]: skip-gram with type-matched negative sampling over walk
//!   corpora;
//! * [`projection`]: removal of the group-difference direction from user
//!   embeddings;
//! * [`gnn`]: a two-layer mean-aggregation GNN trained with an accuracy loss
//!   plus a differentiable demographic-parity or equal-opportunity penalty;
//! * [`predictor`]: an MLP career ranker over user and career embeddings;
//! * [`eval`]: MRR, counting fairness metrics, Pareto frontiers, threshold
//!   tables, nested cross-validation splits and the balance-data baseline;
//! * [`datasets`] and [`pipeline`]: MovieLens-1M loading, a synthetic biased
//!   graph generator and end-to-end orchestration.

pub mod config;
pub mod datasets;
pub mod embedding;
pub mod eval;
pub mod formats;
pub mod gnn;
pub mod hin;
pub mod metapath;
pub mod pipeline;
pub mod predictor;
pub mod projection;
pub mod rng;
pub mod skipgram;

mod error;

pub use error::{Error, Result, StageContext};
pub use hin::{Group, HinGraph, NodeId, TypeId};
