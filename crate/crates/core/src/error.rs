use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported tensor order {0}; only 2 and 4 are supported")]
    UnsupportedOrder(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient data: {n} samples, need at least {min}")]
    InsufficientData { n: usize, min: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("Student-t with {dof} degrees of freedom has no finite fourth cumulant (need dof > 4)")]
    UndefinedMoment { dof: f64 },

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("objective is not finite at the starting point")]
    InvalidStart,

    #[error("tensor decomposition found {found} of {wanted} distinct rank-one terms")]
    DecompositionFailure {
        found: usize,
        wanted: usize,
        /// Unit vectors found before giving up.
        partial: Vec<Vec<f64>>,
    },

    #[error("requested rank {rank} exceeds the admissible bound {bound}")]
    RankTooLarge { rank: usize, bound: usize },

    #[error("rank-one residual {objective:.3e} exceeds threshold {threshold:.3e}; second cumulant inconsistent with the model")]
    ResidualTooLarge { objective: f64, threshold: f64 },

    #[error("Gaussian column undetected: |l_J| / |l| = {ratio:.3e}, second cumulant lies in the span of the known columns")]
    GaussianColumnUndetected { ratio: f64 },

    #[error("witness residual {residual:.3e} violates the rank-one identity")]
    InvalidWitness { residual: f64 },

    #[error("witness is collinear to column {column}")]
    DegenerateWitness { column: usize },

    #[error("enumeration too large: {what}")]
    SizeLimit { what: String },

    #[error("cannot build a system in {dim} variables with {real} real solutions (need even count in [0, {max}])")]
    InvalidCount { dim: usize, real: usize, max: usize },
}

impl Error {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnsupportedOrder(_) => "unsupported_order",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::InvalidData(_) => "invalid_data",
            Error::UndefinedMoment { .. } => "undefined_moment",
            Error::ModelViolation(_) => "model_violation",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidStart => "invalid_start",
            Error::DecompositionFailure { .. } => "decomposition_failure",
            Error::RankTooLarge { .. } => "rank_too_large",
            Error::ResidualTooLarge { .. } => "residual_too_large",
            Error::GaussianColumnUndetected { .. } => "gaussian_column_undetected",
            Error::InvalidWitness { .. } => "invalid_witness",
            Error::DegenerateWitness { .. } => "degenerate_witness",
            Error::SizeLimit { .. } => "size_limit",
            Error::InvalidCount { .. } => "invalid_count",
        }
    }

    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InvalidStart
                | Error::DecompositionFailure { .. }
                | Error::ResidualTooLarge { .. }
                | Error::GaussianColumnUndetected { .. }
        )
    }
}
