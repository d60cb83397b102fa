use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("point ({u}, {v}) escaped the trapping box")]
    Escape { u: f64, v: f64 },

    #[error("inverse did not converge after {iterations} Newton iterations (residual {residual:e})")]
    InverseNotConverged { iterations: usize, residual: f64 },

    #[error("singular matrix")]
    Singular,

    /// The split of `D_x T^n` is too close to conformal, i.e. the point is not in `U_n`.
    #[error("degenerate split at n = {n}: sigma_max/sigma_min = {ratio} (x not in U_n)")]
    Degenerate { n: usize, ratio: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("tracing failed: {0}")]
    Tracing(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("containment violated: margin {margin} exceeds {allowed}")]
    Containment { margin: f64, allowed: f64 },

    #[error("empty sample: {0}")]
    EmptySample(String),

    /// A cover level could not be certified.
    #[error("cover not certified at level {level}, item {item}: {detail}")]
    Cover { level: usize, item: String, detail: String },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
