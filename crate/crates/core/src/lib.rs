//! Bayesian classification trees explored by Metropolis-Hastings.
//!
//! The crate provides a serial MH chain over tree structures and a
//! single-chain parallel sampler in which `C` workers propose candidates
//! from the same state each iteration. Around the samplers sit the pieces
//! needed to check that both produce statistically equivalent posteriors:
//! k-fold splitting, ensemble prediction, per-label metrics, Welch's
//! t-test and a speedup model plus benchmark harness.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below are what most callers want.

pub mod data;
pub mod error;
pub mod eval;
pub mod export;
pub mod moves;
pub mod posterior;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod tree;

pub use data::{
    kfold_split, read_feature_csv, stratified_kfold_split, Dataset, FeatureTable, FoldSplit, SplitSpace, ThresholdDomain,
};
pub use error::{Error, Result};
pub use moves::{propose, MoveKind, MoveProbabilities, Proposal};
pub use posterior::{PriorConfig, PriorMode};
pub use sampler::{run_parallel, run_serial, ChainConfig, ChainResult, Sample};
pub use scalar::Scalar;
pub use tree::{Node, NodeId, NodeKind, Tree};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Tree64 = Tree<f64>;
pub type Tree32 = Tree<f32>;
pub type Proposal64 = Proposal<f64>;
pub type ChainResult64 = ChainResult<f64>;
pub type ChainResult32 = ChainResult<f32>;
