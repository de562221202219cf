use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("probability out of range: item {item} has w = {value}")]
    ProbabilityOutOfRange { item: u32, value: f64 },

    #[error("K exceeds L ({k} > {l})")]
    KExceedsL { k: usize, l: usize },

    #[error("K must be at least 1")]
    ZeroK,

    #[error("duplicate item identifier {0}")]
    DuplicateItem(u32),

    #[error("item {item} is outside the universe 1..={l}")]
    UnknownItem { item: u32, l: usize },

    #[error("invalid ranked list: {0}")]
    InvalidList(String),

    #[error("invalid position bias: {0}")]
    InvalidBias(String),

    #[error("invalid feedback: {0}")]
    InvalidFeedback(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("denominator 1 - K*w_m = {0} is not positive (w_m must be below 1/K)")]
    NonPositiveDenominator(f64),

    #[error("eta = p_K - p_1*w_m = {0} is not positive (w_m must be below 1/lambda_p)")]
    NonPositiveEta(f64),

    #[error("square root of a negative: 4*rho*eta + 1 = {0}")]
    NegativeDiscriminant(f64),

    #[error("invalid target spec: {0}")]
    InvalidTargets(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("zero valid rows in {0}")]
    ZeroValidRows(String),

    #[error("unknown format tag {0:?}")]
    UnknownFormat(String),

    #[error("too few movies: need {need}, have {have}")]
    TooFewMovies { need: usize, have: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by bad input values.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Csv(_))
    }
}
