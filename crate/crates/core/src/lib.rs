//! Layered dictionary matching.
//!
//! A large dictionary is partitioned into clusters, each cluster is replaced
//! by a low-rank code book, and the statistics of the resulting compression
//! error are used to whiten every subsequent least-squares problem. A datum
//! is matched in two stages: a group-sparse hierarchical Bayesian solver
//! picks the clusters that matter, then a sparse, nonnegative solver codes
//! the datum over the original atoms of those clusters only.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod clustering;
pub mod compression;
pub mod dce;
pub mod dictionary;
pub mod error;
pub mod glitch;
pub mod group;
pub mod ias;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod synth;

pub use bundle::{load_library, save_library};
pub use compression::{LowRankFactors, Method, RankRule};
pub use dce::DceModel;
pub use dictionary::{Dictionary, MatrixFormat, Partition};
pub use error::{Error, Result};
pub use group::StructuralPrior;
pub use pipeline::{build_library, match_datum, BuildConfig, CompressedLibrary, MatchResult};
