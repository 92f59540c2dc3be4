use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("not a density operator: {0}")]
    NotDensityOperator(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("coupling list is not Hermitian: {0}")]
    NonHermitianCoupling(String),

    #[error("relative error undefined: ground truth has zero norm")]
    ZeroGroundTruth,

    #[error("pair not observable, L not unique (rank {rank} < {required})")]
    NotObservable { rank: usize, required: usize },

    #[error("input is not a closed-system Liouvillian (relative residual {residual:.3e})")]
    NotLiouvillian { residual: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
