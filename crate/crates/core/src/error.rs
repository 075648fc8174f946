use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the estimation pipeline.
///
/// Every variant maps to a stable, machine-readable code via [`Error::code`],
/// which the CLI forwards verbatim in its error JSON.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` not found")]
    Schema(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("input contains no usable rows")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("logistic fit did not converge after {iterations} iterations")]
    Diverged {
        iterations: usize,
        coefficients: Vec<f64>,
    },

    #[error("target is constant; a logistic model cannot be fitted")]
    DegenerateTarget,

    #[error("no units with treatment = {arm} available to fit the outcome model")]
    UnestimableArm { arm: u8 },

    #[error("no treated cases (sum of A*Y is zero); the ratio denominator is zero")]
    NoTreatedCases,

    #[error("degenerate denominator in {0}")]
    DegenerateDenominator(&'static str),

    #[error("wrong estimator variant: {0}")]
    WrongVariant(String),

    #[error("unknown simulation case {0}")]
    Registry(u32),

    #[error("empty conditioning set while computing the true value")]
    DegenerateTruth,

    #[error("bootstrap produced {successes} usable replicates out of {requested}")]
    InsufficientBootstrap { successes: usize, requested: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::Parse { .. } => "parse",
            Error::EmptyInput => "empty-input",
            Error::Argument(_) => "argument",
            Error::Diverged { .. } => "diverged",
            Error::DegenerateTarget => "degenerate-target",
            Error::UnestimableArm { .. } => "unestimable-arm",
            Error::NoTreatedCases => "no-treated-cases",
            Error::DegenerateDenominator(_) => "degenerate-denominator",
            Error::WrongVariant(_) => "wrong-variant",
            Error::Registry(_) => "registry",
            Error::DegenerateTruth => "degenerate-truth",
            Error::InsufficientBootstrap { .. } => "insufficient-bootstrap",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
