use thiserror::Error;

/// Coarse error class used by callers (e.g. the CLI) to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Estimation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: {message}")]
    RowParse { row: u64, message: String },

    #[error("{errors} unparseable rows exceed the error budget of {budget}; first: {first}")]
    RowBudgetExceeded {
        errors: u64,
        budget: u64,
        first: String,
    },

    #[error("duplicate (worker_id, year) after deduplication: worker {worker_id}, year {year}")]
    DuplicateWorkerYear { worker_id: u64, year: i32 },

    #[error("year {0} missing from CPI series")]
    MissingCpiYear(i32),

    #[error("commuting-zone table: {0}")]
    InvalidCzTable(String),

    #[error("invalid generator configuration: {0}")]
    InvalidDgp(String),

    #[error("estimation sample is empty ({0})")]
    EmptySample(String),

    #[error("absorbed factor `{factor}` has {levels} level(s); need at least 2")]
    DegenerateFactor { factor: String, levels: usize },

    #[error("demeaning did not converge within {max_sweeps} sweeps (max within-group mean {resid:.3e})")]
    NonConvergence { max_sweeps: usize, resid: f64 },

    #[error("rank-deficient design: column `{column}` is collinear with preceding columns")]
    RankDeficient { column: String },

    #[error("cluster factor has a single cluster; clustered standard errors are undefined")]
    SingleCluster,

    #[error("second stage needs at least 3 commuting zones with estimates, got {0}")]
    TooFewCz(usize),

    #[error("log population has zero variance across commuting zones")]
    DegeneratePopulation,

    #[error("percent change undefined for zero baseline")]
    ZeroBaseline,

    #[error("report is missing the baseline cell for grid ({0})")]
    MissingBaseline(String),

    #[error("{0}")]
    Data(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidDgp(_) => ErrorCategory::Config,
            Error::Io(_)
            | Error::Csv(_)
            | Error::MissingColumn(_)
            | Error::RowParse { .. }
            | Error::RowBudgetExceeded { .. }
            | Error::DuplicateWorkerYear { .. }
            | Error::MissingCpiYear(_)
            | Error::InvalidCzTable(_)
            | Error::Data(_) => ErrorCategory::Data,
            Error::EmptySample(_)
            | Error::DegenerateFactor { .. }
            | Error::NonConvergence { .. }
            | Error::RankDeficient { .. }
            | Error::SingleCluster
            | Error::TooFewCz(_)
            | Error::DegeneratePopulation
            | Error::ZeroBaseline
            | Error::MissingBaseline(_) => ErrorCategory::Estimation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
