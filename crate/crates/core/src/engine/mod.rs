//! The likelihood-weighting simulator.

pub mod estimate;
pub mod run;
pub mod sampling;
pub mod score;

pub use estimate::EstimateTable;
pub use run::{
    initial_distribution, run, self_importance_update, Budget, Checkpoint, RunOutput, Simulation,
    TrialRecord, UpdateSchedule, Variant, VariantConfig,
};
pub use sampling::{sample_hypothesis, seeded_rng, SamplingDistribution, TrialStreams};
pub use score::{
    markov_blanket_posteriors, markov_blanket_recompute, sample_score, LikelihoodCache,
    TrialScore, TrialScorer,
};
