use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("codebook collision: symbols {first} and {second} share an index set")]
    CodebookCollision { first: char, second: char },

    #[error("invalid symbol {ch:?} at position {position}")]
    InvalidSymbol { ch: char, position: usize },

    #[error("invalid substance: {0}")]
    InvalidSubstance(String),

    #[error("stale command: entity {0} does not exist")]
    StaleCommand(u32),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("no session: reset must be called before step")]
    NoSession,

    #[error("action decode error: {0}")]
    ActionDecode(String),

    #[error("log parse error at line {line}: {message}")]
    LogParse { line: usize, message: String },

    #[error("probe config error: {0}")]
    ProbeConfig(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
