use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The CLI maps [`Error::is_config_error`] to exit code 2 and everything else
/// to exit code 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("invalid model: {0}")]
    Validation(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("non-finite value {value} at {location}")]
    NonFinite { value: f64, location: String },

    #[error("quadrature failure on [{lo}, {hi}]: {message}")]
    Quadrature { lo: f64, hi: f64, message: String },

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("no root bracketed: {0}")]
    NoRoot(String),

    #[error("nondifferentiable density dependence at equilibrium (Q* = {q_star})")]
    NonDifferentiable { q_star: f64 },

    #[error("winding number computation unstable: {0}")]
    WindingUnstable(String),

    #[error("equilibrium not found: {0}")]
    EquilibriumNotFound(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("simulation aborted at step {step}: {message}")]
    Simulation { step: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::Validation(_)
                | Error::Config { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
