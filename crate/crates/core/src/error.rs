use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value at node {index}")]
    InvalidField { index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("configuration mismatch: {0}")]
    Configuration(&'static str),

    #[error("zero pivot in row {row}")]
    SingularMatrix { row: usize },

    #[error("argument {value} outside [0, {length}]")]
    Domain { value: f64, length: f64 },

    #[error("kernel evaluated on the diagonal xi == s")]
    SingularPoint,

    #[error("Newton iteration failed at step {step}: residual {residual:e} after {iterations} iterations")]
    StepFailure {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("solution blew up at step {step}")]
    Instability { step: usize },

    #[error("non-finite objective or gradient at evaluation point (first bad entry {index})")]
    Evaluation { index: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::Parameter { name, reason }
    }
}
