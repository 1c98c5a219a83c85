use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Adaptive quadrature (or another iterative scheme) did not reach its tolerance.
    #[error("numeric failure: {what} (residual {residual:e})")]
    Numeric { what: String, residual: f64 },

    /// A truncated limit did not stabilise over the ε schedule.
    #[error("limit did not stabilise; increments {increments:?}")]
    NotStabilized { increments: Vec<f64> },

    /// A membership norm required by the operation is not finite.
    #[error("precondition failed: {norm} is not finite ({detail})")]
    Precondition { norm: String, detail: String },

    /// Simple-configuration sampling failed repeatedly.
    #[error("could not sample a simple configuration after {attempts} attempts")]
    NonSimple { attempts: usize },

    /// An explicit construction failed its quantitative hypothesis.
    #[error(
        "construction rejected at level n={n}, g={g}: measured {measured:e} > bound {bound:e}"
    )]
    ConstructionRejected {
        n: usize,
        g: i64,
        measured: f64,
        bound: f64,
    },

    /// Scenario configuration problem.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
