use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid variable: {0}")]
    InvalidVariable(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("scope error: {0}")]
    Scope(String),

    #[error("table has {got} values, expected {expected}")]
    TableSize { expected: usize, got: usize },

    #[error("invalid probability table: {0}")]
    InvalidTable(String),

    #[error("table for {component} sums to {sum}, outside tolerance")]
    Normalization { component: String, sum: f64 },

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("structure is not a web: no terminal component among {remaining}")]
    NotAWeb { remaining: String },

    #[error("unpacking does not match structure: {0}")]
    InvalidUnpacking(String),

    #[error("distributions live on different spaces")]
    SpaceMismatch,

    #[error("all alternative-model weights are zero")]
    AllZeroWeight,

    #[error("system is inconsistent (marginal residual {residual:e})")]
    Inconsistent { residual: f64 },

    #[error("iterative fitting did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("{components} components exceeds the enumeration limit of {limit}")]
    TooManyComponents { components: usize, limit: usize },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable identifier, used on the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidVariable(_) => "invalid-variable",
            Error::UnknownVariable(_) => "unknown-variable",
            Error::Scope(_) => "scope",
            Error::TableSize { .. } => "table-size",
            Error::InvalidTable(_) => "invalid-table",
            Error::Normalization { .. } => "normalization",
            Error::InvalidStructure(_) => "invalid-structure",
            Error::NotAWeb { .. } => "not-a-web",
            Error::InvalidUnpacking(_) => "invalid-unpacking",
            Error::SpaceMismatch => "space-mismatch",
            Error::AllZeroWeight => "all-zero-weight",
            Error::Inconsistent { .. } => "inconsistent",
            Error::NotConverged { .. } => "not-converged",
            Error::TooManyComponents { .. } => "too-many-components",
            Error::UnknownPreset(_) => "unknown-preset",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
