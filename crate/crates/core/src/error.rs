use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frequency code {0} is outside 1..=5")]
    FrequencyCode(i64),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("invalid sampling distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("exact enumeration refused: {n} diseases exceeds the cap of {cap}")]
    TooManyDiseases { n: usize, cap: usize },

    #[error("evidence has probability zero under the network")]
    ImpossibleEvidence,

    #[error("no single disease explains the evidence")]
    NoSingleDiseaseExplanation,

    #[error("simulation found no probability mass after {trials} trials; findings most often impossible: {culprits:?}")]
    NoMassFound {
        trials: u64,
        /// (finding index, number of trials in which it had likelihood zero)
        culprits: Vec<(usize, u64)>,
    },

    #[error("k = {k} is not in 2..={n}")]
    TopK { k: usize, n: usize },

    #[error("case generation failed after {attempts} attempts: {detail}")]
    CaseGeneration { attempts: usize, detail: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Error {
        Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
