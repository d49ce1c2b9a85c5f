use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("corrupt state: {0}")]
    CorruptState(String),
    #[error("packing failure: particle {particle} exceeded {retries} insertion retries")]
    PackingFailure { particle: usize, retries: usize },
    #[error("event storm: more than {limit} events for {n} particles")]
    EventStorm { limit: usize, n: usize },
    #[error("size limit: {what} = {value} exceeds {limit}")]
    SizeLimit {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("overflow guard: exponent {0} exceeds 700; shrink u")]
    OverflowGuard(f64),
    #[error("majorant breach: relative speed {speed} above majorant {majorant}")]
    MajorantBreach { speed: f64, majorant: f64 },
    #[error("time order violation: collision at {found} not before merge time {t}")]
    TimeOrderViolation { found: f64, t: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
