use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no implied volatility: {0}")]
    NoSolution(String),

    #[error("quadrature failed to reach tolerance {tolerance:e} (last error estimate {estimate:e})")]
    Integration { tolerance: f64, estimate: f64 },

    #[error("strike {strike}: {source}")]
    AtStrike { strike: f64, source: Box<Error> },

    #[error("non-finite futures integrand at s = {0:e}")]
    NonFinite(f64),

    #[error("no option expiry within {max_days} days of {as_of}")]
    NoExpiry { as_of: NaiveDate, max_days: i64 },

    #[error("moneyness filter removed every quote for expiry {expiry} on {as_of}")]
    EmptySlice { as_of: NaiveDate, expiry: NaiveDate },

    #[error("{file}:{line}: column `{column}`: {message}")]
    Parse {
        file: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("duplicate date {date} in {file}")]
    DuplicateKey { file: String, date: NaiveDate },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("column `{0}` is constant")]
    ConstantColumn(String),

    #[error("coordinate descent stopped after {epochs} epochs with duality gap {gap:e}")]
    NonConvergence {
        epochs: usize,
        gap: f64,
        coefficients: Vec<f64>,
        intercept: f64,
    },

    #[error("shrinkage factor undefined: least-squares coefficients have zero norm")]
    UndefinedShrinkage,

    #[error("no calibration record for {0}")]
    MissingCalibration(NaiveDate),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_strike(strike: f64, source: Error) -> Self {
        Error::AtStrike {
            strike,
            source: Box::new(source),
        }
    }
}
