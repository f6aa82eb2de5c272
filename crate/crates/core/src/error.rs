use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The degree model has zero mean degree, so excess-degree quantities are undefined.
    #[error("degenerate degree model: mean degree is zero")]
    DegenerateModel,

    #[error("invalid {field}{}: {reason}", index.map(|i| format!("[{i}]")).unwrap_or_default())]
    Validation {
        field: String,
        index: Option<usize>,
        reason: String,
    },

    #[error("type index {index} out of range for {types} types")]
    IndexOutOfRange { index: usize, types: usize },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("operation requires an ensemble built from mask efficiencies")]
    RankOneRequired,

    #[error("network has {network} mask types but ensemble has {ensemble}")]
    TypeMismatch { network: usize, ensemble: usize },

    #[error("no node of type {type_index} found after {redraws} network redraws")]
    SeedExhausted { type_index: usize, redraws: usize },

    #[error("exhaustive enumeration needs {draws} directed draws, limit is {limit}")]
    OracleTooLarge { draws: usize, limit: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("network format error at line {line}: {reason}")]
    NetworkFormat { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, index: Option<usize>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            index,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
