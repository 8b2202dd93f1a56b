use thiserror::Error;

/// Errors raised anywhere in the recovery stack.
///
/// The CLI maps each variant onto a fixed exit code, see [`Error::exit_code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exponent argument {arg:e} exceeds the representable range (|alpha*t| <= {limit})")]
    Range { arg: f64, limit: f64 },

    #[error("need at least {required} records, got {got}")]
    InsufficientRecords { required: usize, got: usize },

    #[error("need at least {required} moments, table holds {got}")]
    InsufficientMoments { required: usize, got: usize },

    #[error("time {t} is not a grid point")]
    OffGrid { t: f64 },

    #[error("grid too coarse: {points} points in [0, {t}], need at least 3")]
    GridTooCoarse { t: f64, points: usize },

    #[error("matrix is numerically singular (pivot {pivot:e} at step {step}, threshold {threshold:e})")]
    SingularMatrix { step: usize, pivot: f64, threshold: f64 },

    #[error("root finder did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("Frobenius polynomial has complex roots: {roots:?}")]
    ComplexRates { roots: Vec<(f64, f64)> },

    #[error("recovered rates {first} and {second} coincide within {threshold:e}")]
    DuplicateRates { first: f64, second: f64, threshold: f64 },

    #[error("shift {shift} leaves shifted value {shifted} < 0 at t = {t}")]
    ShiftTooSmall { shift: f64, t: f64, shifted: f64 },

    #[error("generator gave up after {attempts} attempts: {reason}")]
    GeneratorExhausted { attempts: usize, reason: String },

    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularMatrix { .. } => 3,
            Error::ComplexRates { .. } => 4,
            Error::DuplicateRates { .. } => 5,
            Error::ShiftTooSmall { .. } => 6,
            Error::NonConvergence { .. } => 7,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
