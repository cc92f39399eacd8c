/// Errors produced by the library.
///
/// The CLI maps each variant to a distinct process exit code, so the
/// categories here are part of the external contract: `Config` for bad
/// shapes/settings, `Data` for unusable inputs, `Diverged` for training
/// failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn diverged(msg: impl Into<String>) -> Self {
        Error::Diverged(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
