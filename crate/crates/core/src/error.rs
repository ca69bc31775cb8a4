use thiserror::Error;

/// Errors raised by the incentive-design library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{name} is not symmetric positive definite")]
    NotPositiveDefinite { name: &'static str },

    #[error("{name} is not symmetric positive semidefinite")]
    NotPsd { name: &'static str },

    #[error("horizon must be at least 1, got {0}")]
    BadHorizon(usize),

    #[error("{name} contains a non-finite entry")]
    NonFiniteInput { name: &'static str },

    #[error("trajectory left the finite range at stage {stage}")]
    NonFinite { stage: usize },

    #[error("closed loop is not Schur stable (spectral radius {spectral_radius})")]
    Unstable { spectral_radius: f64 },

    #[error("reference is zero with A != 1: steady-state cost is identically zero")]
    DegenerateReference,

    #[error("horizon aggregate is {gamma}: limiting objective is flat")]
    DegenerateGamma { gamma: f64 },

    #[error("invalid scalar instance: {0}")]
    InvalidScalar(String),

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),

    #[error("cost evaluation is not finite at theta = {theta:?}")]
    NonFiniteCost { theta: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;
