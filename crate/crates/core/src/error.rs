use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("missing orbital label `{0}`")]
    MissingLabel(String),

    #[error("excited state has zero norm ({0})")]
    ZeroNorm(String),

    #[error("unsupported logical gate: {0}")]
    UnsupportedGate(String),

    #[error("branch enumeration exceeded {limit} live branches")]
    BranchExplosion { limit: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
