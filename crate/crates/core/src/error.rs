use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric error in {op}: {detail}")]
    Numeric { op: &'static str, detail: String },

    #[error("tape error: {0}")]
    Tape(String),

    #[error("matrix is not positive definite after jitter {max_jitter:e}{}", series_suffix(.series))]
    NotPositiveDefinite {
        max_jitter: f64,
        series: Option<String>,
    },

    #[error("singular triangular factor: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at {}:{line}: {detail}", .path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    #[error("series '{series}' has a gap of {missing} steps before {at}")]
    Gap {
        series: String,
        missing: i64,
        at: String,
    },

    #[error("series '{series}' has {len} observations, needs at least {needed}")]
    Length {
        series: String,
        len: usize,
        needed: usize,
    },

    #[error("series are not aligned: {0}")]
    Alignment(String),

    #[error("unknown series '{0}'")]
    UnknownSeries(String),

    #[error("degenerate normalizer: {0}")]
    DegenerateNormalizer(String),

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn series_suffix(series: &Option<String>) -> String {
    match series {
        Some(s) => format!(" (series '{s}')"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn numeric(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a series name to errors raised while processing that series.
    pub fn for_series(self, name: &str) -> Self {
        match self {
            Error::NotPositiveDefinite { max_jitter, .. } => Error::NotPositiveDefinite {
                max_jitter,
                series: Some(name.to_string()),
            },
            Error::Numeric { op, detail } => Error::Numeric {
                op,
                detail: format!("{detail} (series '{name}')"),
            },
            other => other,
        }
    }
}
