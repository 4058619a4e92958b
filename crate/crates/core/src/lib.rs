//! Fixed-confidence best-arm identification for correlated multi-armed bandits.
//!
//! Correlation between arms is supplied as a pseudo-reward table: `s(l, k)(r)`
//! upper-bounds the expected reward of arm `l` given that arm `k` returned `r`.
//! The crate provides the tables and their construction recipes, the index
//! families built on top of them, the C-LUCB family of algorithms next to the
//! classical baselines (Racing, lil'UCB, LUCB, LUCB++), correlated reward
//! environments, a rating-dataset pipeline and a reproducible Monte-Carlo
//! experiment harness.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what the harness and
//! the CLI use.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod confidence;
pub mod environment;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod instances;
pub mod policies;
pub mod pseudoreward;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use confidence::{BoundFamily, ConfidenceSchedule};
pub use environment::{AnyEnvironment, BestArm, DatasetEnv, Environment, LatentSourceEnv, TabularEnv};
pub use error::{Error, Result};
pub use policies::{Algorithm, Policy, PolicyConfig, StepOutcome};
pub use pseudoreward::{JointPmf, PseudoRewardTable, RewardSupport};
pub use scalar::Scalar;
pub use stats::{ArmStats, PseudoUcbClock};

/// `f64` pseudo-reward table.
pub type Table = PseudoRewardTable<f64>;
/// `f64` joint reward distribution.
pub type Joint = JointPmf<f64>;
/// `f64` reward alphabet.
pub type Support = RewardSupport<f64>;
/// `f64` confidence schedule.
pub type Schedule = ConfidenceSchedule<f64>;
/// `f64` per-arm statistics.
pub type Stats = ArmStats<f64>;
/// `f64` competitive-arm summary.
pub type Summary = analysis::CompetitiveSummary<f64>;
/// `f64` experiment.
pub type Experiment = harness::Experiment<f64>;
/// `f64` experiment report.
pub type Report = harness::ExperimentReport<f64>;
