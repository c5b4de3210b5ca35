use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("row {row}: non-numeric value `{value}` in column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("duplicate observation for unit `{unit}` at time `{time}`")]
    DuplicateObservation { unit: String, time: String },

    #[error("unbalanced panel: unit `{unit}` has {found} observations, expected {expected}")]
    Unbalanced {
        unit: String,
        found: usize,
        expected: usize,
    },

    #[error("unit `{unit}` is observed at different time points than unit `{reference}`")]
    TimeMismatch { unit: String, reference: String },

    #[error("panel needs at least 2 units and 2 periods (got N={n_units}, T={n_periods})")]
    TooSmall { n_units: usize, n_periods: usize },

    #[error("degenerate covariate: {0}")]
    DegenerateCovariate(&'static str),

    #[error("the response variable y is required for this operation")]
    MissingResponse,

    #[error("nu_hat is undefined: the within residual variance estimate is zero")]
    UndefinedNuHat,

    #[error("negative-variance regime: q(nu_hat, T) = {q} <= 0 at nu_hat = {nu_hat}")]
    NegativeVariance { nu_hat: f64, q: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("p*(M+1) = {index} is not an integer for p = {p}, M = {m}; adjust M")]
    NonIntegerOrder { p: f64, m: usize, index: f64 },

    #[error("target coverage {target} is unreachable with c < 1; maximum attainable is {max}")]
    UnreachableCoverage { target: f64, max: f64 },

    #[error("no valid simulation runs ({invalid} of {total} runs flagged invalid)")]
    NoValidRuns { invalid: usize, total: usize },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case tag for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "missing_column",
            Error::NonNumeric { .. } => "non_numeric",
            Error::DuplicateObservation { .. } => "duplicate_observation",
            Error::Unbalanced { .. } => "unbalanced",
            Error::TimeMismatch { .. } => "time_mismatch",
            Error::TooSmall { .. } => "too_small",
            Error::DegenerateCovariate(_) => "degenerate_covariate",
            Error::MissingResponse => "missing_response",
            Error::UndefinedNuHat => "undefined_nu_hat",
            Error::NegativeVariance { .. } => "negative_variance",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonIntegerOrder { .. } => "non_integer_order",
            Error::UnreachableCoverage { .. } => "unreachable_coverage",
            Error::NoValidRuns { .. } => "no_valid_runs",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_open_unit(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must lie in (0, 1), got {value}"
        )))
    }
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
