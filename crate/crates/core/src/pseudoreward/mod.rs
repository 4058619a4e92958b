//! Pseudo-reward tables `s(l, k)(r)`, the joint laws they are checked
//! against, and the recipes that build them.

mod joint;
mod support;
mod table;

pub use joint::JointPmf;
pub use support::RewardSupport;
pub use table::{latent_source_table, probabilistic_translation, DominanceViolation, PseudoRewardTable};
