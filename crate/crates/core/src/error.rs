use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing series: {0}")]
    MissingSeries(String),

    #[error("unparseable date {value:?} (expected YYYY-MM)")]
    BadDate { value: String },

    #[error("non-consecutive months: {prev} followed by {next}")]
    NonConsecutive { prev: String, next: String },

    #[error("duplicate date {0}")]
    DuplicateDate(String),

    #[error("non-numeric value {value:?} for series {series} at {date}")]
    BadValue {
        series: String,
        date: String,
        value: String,
    },

    #[error("non-positive value under log transform in series {series} at row {row}")]
    NonPositive { series: String, row: usize },

    #[error("sequence too short: need more than {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("zero variance in series {0}")]
    ZeroVariance(String),

    #[error("empty column: series {0} has no observed values")]
    EmptyColumn(String),

    #[error("empty row at index {0}")]
    EmptyRow(usize),

    #[error("rank deficient design; collinear columns: {0:?}")]
    RankDeficient(Vec<String>),

    #[error("no convergence after {iterations} iterations (last max change {gap:.3e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("missing benchmark {benchmark} for target {target}, h={h}")]
    MissingBenchmark {
        benchmark: String,
        target: String,
        h: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the input data rather than by the program.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Solver(_) | Error::Divergence { .. })
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
