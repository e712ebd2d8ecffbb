use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("polynomial is not Schur (a root lies on or outside the unit circle)")]
    NotSchur,

    #[error("expansion constant term is {got}, expected 1/2 (numerator not monic relative to denominator)")]
    ConstantTermMismatch { got: f64 },

    #[error("singular linear system in {context}")]
    Singular { context: &'static str },

    #[error("denominator vanishes on the unit circle near theta = {theta}")]
    PoleOnCircle { theta: f64 },

    #[error("point {re}+{im}i is at or near a pole")]
    NearPole { re: f64, im: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance sequence is not positive (Toeplitz minimum eigenvalue {min_eig})")]
    NotPositive { min_eig: f64 },

    #[error("all-zero observation record")]
    ZeroRecord,

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solution left the valid branch: h'Ph = {hph} >= 1")]
    InvalidBranch { hph: f64 },

    #[error("extracted denominator is not Schur")]
    ExtractedNotSchur,

    #[error("I + T is singular or ill-conditioned (condition estimate {cond:e})")]
    IllConditionedIPlusT { cond: f64 },

    #[error("interpolation data is not conjugate-closed (imaginary residue {residue:e})")]
    NotConjugateClosed { residue: f64 },

    #[error("interpolation not achieved at this sigma (residual {residual:e}): {reason}")]
    Unsolvable { residual: f64, reason: String },
}
