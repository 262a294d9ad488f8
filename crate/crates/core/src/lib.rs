//! Approximate randomization tests for linear regressions with a small
//! number of clusters.
//!
//! The library estimates the model separately in each cluster, combines the
//! per-cluster estimates with sign changes, and reports p-values, critical
//! values and confidence intervals whose size is controlled even with as few
//! as five clusters.

pub mod art;
pub mod blocks;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod group;
pub mod interval;
pub mod io;
pub mod model;
pub mod simulation;

pub use art::{run_test, run_wald_test, ScoreScaling, ScoreVector, TestResult, TestVariant};
pub use blocks::{blockify, merge_clusters, plan_blocks, BlockPlan};
pub use error::{ArtError, Result};
pub use estimation::{fit_per_cluster, fit_restricted, ClusterEstimates};
pub use group::{GroupMode, GroupSpec, SignGroup};
pub use interval::{confidence_interval, interval_by_inversion, ConfidenceInterval};
pub use model::{
    canonicalize, ClusteredDataset, ExtendedReal, LinearHypothesis, MultiHypothesis, RawRow,
    SignVector,
};
