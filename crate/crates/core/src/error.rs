use thiserror::Error;

/// Errors raised by the library. Variants are split into precondition
/// violations and numeric failures; the CLI maps these onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("word of length {depth} exceeds the depth cap {cap}")]
    DepthCapExceeded { depth: usize, cap: usize },

    #[error("digit {digit} exceeds the map table ({available} maps available)")]
    DigitOutOfTable { digit: u64, available: u64 },

    #[error("decay sandwich fails at index {i_max} for eps = {eps}; system is not d-decaying at this eps")]
    NotDecaying { eps: f64, i_max: u64 },

    #[error("restriction table exhausted: no value for n = {0}")]
    TableExhausted(u64),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("window at level {level} has {size} digits; at least {needed} are required")]
    WindowTooSmall { level: usize, size: u64, needed: u64 },

    #[error("digit magnitude overflow after {achieved_depth} digits")]
    DigitOverflow { achieved_depth: usize },

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("prediction declined: {0}")]
    PredictionDeclined(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by caller input rather than numerical failure.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::DepthCapExceeded { .. }
                | Error::DigitOutOfTable { .. }
                | Error::TableExhausted(_)
                | Error::PredictionDeclined(_)
                | Error::Parse(_)
                | Error::Io(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("{other:?}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
