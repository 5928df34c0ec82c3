use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid system dimensions: {0}")]
    InvalidDims(String),

    #[error("unknown system label `{0}`")]
    UnknownLabel(String),

    #[error("`{0:?}` is not a permutation of the system labels")]
    NotAPermutation(Vec<String>),

    #[error("matrix is not Hermitian (max |M - M^dag| = {violation:e})")]
    NotHermitian { violation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("operator is not unitary/isometric (residual {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("operator is not a co-isometry, V V^dag != 1 (residual {residual:e})")]
    NotCoIsometric { residual: f64 },

    #[error("map is not trace preserving (residual {residual:e})")]
    NotTracePreserving { residual: f64 },

    #[error("state trace is {trace}, expected 1")]
    NotNormalized { trace: f64 },

    #[error("vector is not normalized (norm {norm})")]
    NotUnitVector { norm: f64 },

    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("{0}")]
    RankDeficient(String),

    #[error("prior does not satisfy the coherence-destroying condition (residual {residual:e})")]
    PriorNotDecohered { residual: f64 },

    #[error("projectors are not orthogonal and complete (residual {residual:e})")]
    InvalidProjectors { residual: f64 },

    #[error("evidence has zero probability under the prior")]
    ZeroProbabilityEvidence,

    #[error("soft evidence is supported where the prior predicts zero probability")]
    SupportViolation,

    #[error("invalid probability table: {0}")]
    InvalidDistribution(String),

    #[error("{0}")]
    MissingInput(String),

    #[error("sweep failed at (x = {x}, y = {y}): {source}")]
    SweepPoint {
        x: f64,
        y: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
