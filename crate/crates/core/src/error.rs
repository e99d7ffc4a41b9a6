use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum DmaError {
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("index out of range: {what} = {index}, limit {limit}")]
    Range {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("{0}")]
    Domain(String),

    #[error("Green's function singularity: {0}")]
    Singularity(String),

    #[error("termination admittance is undefined: weight {index} vanishes (phase {phase})")]
    SingularTermination { index: usize, phase: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("analog beamformer is rank deficient (W W^H not invertible)")]
    RankDeficient,

    #[error("effective combiner is zero (v^H W W^H v = 0)")]
    DegenerateCombiner,

    #[error("Fisher information is singular (eigenvalues {eigenvalues:?})")]
    SingularInformation { eigenvalues: Vec<f64> },

    #[error("design matrix is zero")]
    DegenerateDesign,

    #[error("I/O error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl DmaError {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        DmaError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DmaError>;
