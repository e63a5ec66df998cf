use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which end of the spectrum an estimate was chasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Largest,
    Smallest,
}

impl std::fmt::Display for Extreme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extreme::Largest => f.write_str("largest"),
            Extreme::Smallest => f.write_str("smallest"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("row {row} has zero norm")]
    DegenerateRow { row: usize },

    #[error("empty or invalid row range [{lo}, {hi}] for a matrix with {rows} rows")]
    Range { lo: usize, hi: usize, rows: usize },

    #[error("invalid value for {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("{0}")]
    Unsupported(String),

    #[error("CGLS did not converge in {iterations} iterations (relative normal residual {residual:e})")]
    CglsNotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("{extreme} singular value estimate did not converge in {iterations} iterations")]
    SpectralNotConverged { extreme: Extreme, iterations: usize },

    #[error("submatrix for worker {worker} has {rows} rows but {cols} columns; it cannot have full column rank")]
    RankDeficient {
        worker: usize,
        rows: usize,
        cols: usize,
    },

    #[error("system has no reference solution to measure error against")]
    MissingReference,

    #[error("malformed system file at byte {offset}: {reason}")]
    Parse { offset: u64, reason: String },

    #[error("unsupported system file version {found:#04x}")]
    UnsupportedVersion { found: u8 },

    #[error("transport protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }
}
