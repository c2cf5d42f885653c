use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("grid must have at least 3 points per axis, got {nx}x{ny}")]
    InvalidGrid { nx: usize, ny: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("field has {found} values, grid needs {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("reference field has zero norm")]
    DegenerateReference,

    #[error("({nx}x{ny}) grid cannot be coarsened by factor {factor}")]
    NotDivisible { nx: usize, ny: usize, factor: usize },

    #[error("{0}")]
    Domain(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("numerically singular pivot at unknown {index}")]
    SingularPivot { index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("solve for incident direction {direction} failed: {source}")]
    Direction { direction: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
