use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("psf slope alpha = {0} is not normalizable (needs alpha > 1)")]
    NonNormalizable(f64),
    #[error("coefficient layout: {0}")]
    Layout(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("image is outside the intercept-only domain (no feasible root)")]
    NotInDomain,
    #[error("numerical failure: {message}")]
    NumericalFailure { message: String, trace: Vec<f64> },
    #[error("degenerate null model: {dropped} of {total} draws outside the domain")]
    DegenerateNull { dropped: usize, total: usize },
    #[error("singular triangular system: zero diagonal at shell {0}")]
    Singular(usize),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("scenario failed: {failed} of {total} replicates failed")]
    Scenario { failed: usize, total: usize },
    #[error("unknown profile name '{0}'")]
    UnknownProfile(String),
    #[error("config: {0}")]
    Config(String),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure { .. }
                | Error::Singular(_)
                | Error::DegenerateNull { .. }
                | Error::Scenario { .. }
                | Error::UndefinedMetric(_)
        )
    }
}
