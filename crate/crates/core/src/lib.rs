//! Permutation-based explanations (partial dependence, ICE, permutation
//! feature importance) for tabular predictors, and an attack that swaps in
//! compensating outputs on extrapolated rows so that PD plots follow an
//! attacker-chosen curve while real rows keep the original predictions.

pub mod attack;
pub mod data;
pub mod error;
pub mod explain;
pub mod learner;
pub mod metrics;
pub mod study;

pub use error::{Error, ErrorClass, Result};
