use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("PointOutsideTube: distance {distance:.6e} exceeds tube radius {tube:.6e}")]
    PointOutsideTube { distance: f64, tube: f64 },

    #[error("NonConvergence: {context} after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { context: &'static str, iterations: usize, residual: f64 },

    #[error("UnsupportedSurface: {0}")]
    UnsupportedSurface(String),

    #[error("UnknownProfile: {0}")]
    UnknownProfile(String),

    #[error("DegenerateMesh: {0}")]
    DegenerateMesh(String),

    #[error("FlowEvaluationFailure: {0}")]
    FlowEvaluationFailure(String),

    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("NonFiniteValue: {0}")]
    NonFiniteValue(String),

    #[error("SingularElement: element {element} has Jacobian determinant {det:.3e}")]
    SingularElement { element: usize, det: f64 },

    #[error("PointNotOnMesh: {0}")]
    PointNotOnMesh(String),

    #[error("InvalidExponent: {0}")]
    InvalidExponent(f64),

    #[error("StepTooLarge: {0}")]
    StepTooLarge(String),

    #[error("MeshMismatch: {0}")]
    MeshMismatch(String),

    #[error("BudgetExceeded: {0}")]
    BudgetExceeded(String),

    #[error("InsufficientSamples: {0}")]
    InsufficientSamples(String),

    #[error("HTooLarge: h = {h:.6e} must be below 1/(4 C_*) = {limit:.6e}")]
    HTooLarge { h: f64, limit: f64 },

    #[error("RichardsonFailure: {0}")]
    RichardsonFailure(String),

    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),

    #[error("IOFailure: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short category name, the prefix of the `Display` output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::PointOutsideTube { .. } => "PointOutsideTube",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::UnsupportedSurface(_) => "UnsupportedSurface",
            Error::UnknownProfile(_) => "UnknownProfile",
            Error::DegenerateMesh(_) => "DegenerateMesh",
            Error::FlowEvaluationFailure(_) => "FlowEvaluationFailure",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteValue(_) => "NonFiniteValue",
            Error::SingularElement { .. } => "SingularElement",
            Error::PointNotOnMesh(_) => "PointNotOnMesh",
            Error::InvalidExponent(_) => "InvalidExponent",
            Error::StepTooLarge(_) => "StepTooLarge",
            Error::MeshMismatch(_) => "MeshMismatch",
            Error::BudgetExceeded(_) => "BudgetExceeded",
            Error::InsufficientSamples(_) => "InsufficientSamples",
            Error::HTooLarge { .. } => "HTooLarge",
            Error::RichardsonFailure(_) => "RichardsonFailure",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "IOFailure",
        }
    }
}
