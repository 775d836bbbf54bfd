use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A sample or observed value outside the accepted domain (NaN, infinite).
    #[error("input domain error: {0}")]
    InputDomain(String),

    /// Shapes or sizes that do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Training needs every stream in every step.
    #[error("incomplete frame: missing stream `{0}`")]
    IncompleteFrame(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("connectivity error: {0}")]
    Connectivity(String),

    #[error("state error: {0}")]
    State(String),

    #[error("no signal: activity vector has no positive entry")]
    NoSignal,

    #[error("size error: {0}")]
    Size(String),

    #[error("specification error: {0}")]
    Specification(String),

    /// Malformed data file. `line` is 1-based.
    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
