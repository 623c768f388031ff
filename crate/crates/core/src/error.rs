use thiserror::Error;

/// Errors shared by every module in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coefficient is NaN")]
    NanCoefficient,

    #[error("dyadic rational out of range: {0}")]
    DyadicOutOfRange(String),

    #[error("cannot parse {what} from {input:?}: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    #[error("sample point {omega} lies outside [0, 1)")]
    OmegaOutOfRange { omega: String },

    #[error("step function is malformed: {0}")]
    MalformedStepFunction(String),

    #[error("common refinement needs {pieces} pieces, exceeding the cap of {cap}")]
    PieceCapExceeded { pieces: usize, cap: usize },

    #[error("family of step functions is empty")]
    EmptyFamily,

    #[error("coefficient list has length {coeffs} but family has length {family}")]
    LengthMismatch { coeffs: usize, family: usize },

    #[error("malformed matrix row: {0}")]
    MalformedRow(String),

    #[error("matrix {name} has no row {index}")]
    RowUnavailable { name: String, index: usize },

    #[error("row {row} needs the first {needed} sequence terms but only {got} were supplied")]
    InsufficientSequence {
        row: usize,
        needed: usize,
        got: usize,
    },

    #[error("truncation of row {row} is uncertifiable: {reason}")]
    UncertifiableTail { row: usize, reason: String },

    #[error("sequence index {n} is outside the guarded range [{min}, {max}]")]
    GuardRange { n: usize, min: usize, max: usize },

    #[error("sequence family parameters are unrealizable: {0}")]
    Unrealizable(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o failure at {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
