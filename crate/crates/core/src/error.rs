use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{len} bits cannot be split into {bits_per_symbol}-bit symbols")]
    IndivisibleLength { len: usize, bits_per_symbol: usize },

    #[error("symbol {0} is not in the alphabet")]
    NotInAlphabet(String),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("noise variance is undefined for a noise-free (infinite Eb/N0) channel")]
    NoiseFree,

    #[error("packet length {n} exceeds the enumeration limit of {max} symbols")]
    TooLarge { n: usize, max: usize },

    #[error("curve `{curve}` does not bracket target BER {target:e}")]
    NotBracketed { curve: String, target: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
