use thiserror::Error;

/// Everything that can go wrong while building networks, paths or certificates.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch at layer {layer}: {detail}")]
    DimensionMismatch { layer: usize, detail: String },

    #[error("invalid activation: {0}")]
    InvalidActivation(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("cross-entropy targets must be one-hot; row {row} is not")]
    NotOneHot { row: usize },

    #[error("infeasible linear system: residual {residual:.3e} exceeds allowed {allowed:.3e}")]
    Infeasible { residual: f64, allowed: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("first-layer feature rank {achieved} < {required} after {retries} redraws")]
    RankNotRestored { achieved: usize, required: usize, retries: usize },

    #[error("no dependent first-layer column at or after position {position}; loosen the rank tolerance and restore rank again")]
    NoDependentColumn { position: usize },

    #[error("no path found: homotopy stalled at max loss {max_loss:.6e} above alpha {alpha:.6e}")]
    HomotopyFailed { max_loss: f64, alpha: f64 },

    #[error("determinant sign is degenerate")]
    DegenerateDeterminant,

    #[error("path segments do not chain: segment {index} ends away from the next start")]
    BrokenChain { index: usize },

    #[error("training diverged at step {step} (loss is not finite); try a smaller learning rate")]
    Diverged { step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable snake-case name of the variant, for machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidActivation(_) => "invalid_activation",
            Error::InvalidData(_) => "invalid_data",
            Error::NotOneHot { .. } => "not_one_hot",
            Error::Infeasible { .. } => "infeasible",
            Error::Precondition(_) => "precondition",
            Error::RankNotRestored { .. } => "rank_not_restored",
            Error::NoDependentColumn { .. } => "no_dependent_column",
            Error::HomotopyFailed { .. } => "homotopy_failed",
            Error::DegenerateDeterminant => "degenerate_determinant",
            Error::BrokenChain { .. } => "broken_chain",
            Error::Diverged { .. } => "diverged",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
