//! Bipartite graph embedding with jointly learned cluster centers.
//!
//! Each user–item score fuses an explicit cosine relation with an implicit,
//! cluster-mediated one. See the crate README for the command-line tool.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod trainer;

pub use config::{Averaging, Candidates, EvalConfig, TrainConfig};
pub use error::{Error, Result};
pub use graph::BipartiteGraph;
pub use eval::EvalReport;
pub use model::{CcbieParams, Checkpoint, ModelShape, Scorer, VariantConfig, VariantMode};
pub use trainer::{train, TrainHistory, TrainOptions, TrainOutcome};
