//! Posterior inference in two-level noisy-OR diagnosis networks by
//! likelihood weighting, with exact enumeration for small networks and a
//! harness for running and evaluating experiments.

pub mod engine;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod generate;
pub mod heuristics;
pub mod io;
pub mod metrics;
pub mod network;

pub use error::{Error, Result};
pub use network::{Evidence, FindingState, Hypothesis, LogProb, Network};
