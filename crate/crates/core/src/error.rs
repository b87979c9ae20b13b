use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no data")]
    NoData,
    #[error("invalid reading: {0}")]
    InvalidReading(String),
    #[error("underdetermined channel `{0}`: fewer than two observations")]
    UnderdeterminedChannel(String),
    #[error("split out of range: {0}")]
    SplitOutOfRange(String),
    #[error("horizon too long: horizon {horizon} with frame length {len}")]
    HorizonTooLong { horizon: usize, len: usize },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),
    #[error("no such channel `{0}`")]
    NoSuchChannel(String),
    #[error("insufficient history: segment of {len} steps, need {needed}")]
    InsufficientHistory { len: usize, needed: usize },
    #[error("ill-conditioned fit (use a ridge penalty > 0): {0}")]
    IllConditionedFit(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("empty evaluation set")]
    EmptyEvaluationSet,
    #[error("no peaks: smoothed differences are constant")]
    NoPeaks,
    #[error("insufficient trials for `{0}`: need at least two seeds")]
    InsufficientTrials(String),
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("plugin handshake failed: {0}")]
    PluginHandshake(String),
    #[error("plugin error: {0}")]
    Plugin(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
