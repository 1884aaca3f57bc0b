use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unknown contact point {0}")]
    UnknownContact(String),

    #[error("unknown link {0}")]
    UnknownLink(String),

    #[error("unknown output {0}")]
    UnknownOutput(String),

    #[error("duplicate contact point {0} in contact set")]
    DuplicateContact(usize),

    #[error("contact Gram matrix is singular; redundant constraint rows {rows:?}")]
    SingularContactGram { rows: Vec<usize> },

    #[error("contact Jacobian is rank deficient (rank {rank} < {rows} rows)")]
    RankDeficient { rank: usize, rows: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("constrained dynamics system is singular")]
    SingularDynamics,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid controller config: {0}")]
    InvalidController(String),

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("unreachable gait parameters: {0}")]
    Unreachable(String),

    #[error("time {t} outside of [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("empty integration window [{t0}, {tf}]")]
    EmptyWindow { t0: f64, tf: f64 },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed csv: {0}")]
    MalformedCsv(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            found,
        })
    }
}
