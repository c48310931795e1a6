//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("date {0} outside the supported range 0000-01-01..=9999-12-31")]
    DateOutOfRange(String),

    #[error("easter window unknown for year {year}; the loaded table covers {min}..={max}")]
    EasterUnknown { year: i32, min: i32, max: i32 },

    #[error("invalid easter table: {0}")]
    EasterTable(String),

    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("duplicate sample for {date} quarter {quarter}")]
    DuplicateSample { date: String, quarter: usize },

    #[error("non-positive or non-finite load values at: {0}")]
    NonPositiveLoad(String),

    #[error("invalid day profile: {0}")]
    Profile(String),

    #[error("no training pairs in the requested range")]
    NoTrainingPairs,

    #[error("no forecastable days: {0}")]
    EmptyForecast(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank-deficient system{ctx}: numerical rank {rank} of {dim}", ctx = fmt_ctx(.context))]
    RankDeficient {
        rank: usize,
        dim: usize,
        context: String,
    },

    #[error("eigendecomposition failed to converge ({0})")]
    EigenFailure(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("misaligned series: {0}")]
    Alignment(String),

    #[error("missing predictions for in-scope days: {0}")]
    Coverage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn fmt_ctx(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" ({context})")
    }
}

impl Error {
    /// Whether the failure is numerical (singular systems, overflow) rather
    /// than a data/configuration problem. Drives the CLI exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::EigenFailure(_)
                | Error::Range(_)
                | Error::Dimension(_)
        )
    }
}
