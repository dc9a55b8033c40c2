use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Cuntz relation violated: ||sum v v* - I|| = {residual:e}")]
    CuntzRelationViolated { residual: f64 },

    #[error("support compression broke the Cuntz relation: residual {residual:e}")]
    SupportCompressionBrokeCuntz { residual: f64 },

    #[error("letter {letter} out of range for alphabet size {d}")]
    LetterOutOfRange { letter: usize, d: usize },

    #[error("word lengths differ: |I| = {left}, |J| = {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("size cap exceeded: {what} = {requested} > {cap}")]
    SizeCapExceeded {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("observable windows overlap: {0}")]
    OverlapError(String),

    #[error("invariant density is singular (min eigenvalue {min_eig:e})")]
    RhoSingular { min_eig: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("decay rate alpha = {alpha} is 1 within tolerance; no exponential decay can be certified")]
    AlphaIsOne { alpha: f64 },

    #[error("state is not in detailed balance")]
    NotDetailedBalance,

    #[error("parse error at {path}: {message}")]
    ParseError { path: String, message: String },

    #[error("unknown example '{0}'")]
    UnknownExample(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
