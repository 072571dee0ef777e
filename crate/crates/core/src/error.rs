use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value produced by {0}")]
    Numeric(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(
        "non-finite training loss at epoch {epoch}, batch {batch}: \
         L_ce={l_ce}, L_cp={l_cp}, L={loss}"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        l_ce: f64,
        l_cp: f64,
        loss: f64,
    },

    #[error("train split {train_split}{}: {source}", resplit_suffix(.resplit))]
    Run {
        train_split: usize,
        resplit: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn resplit_suffix(resplit: &Option<usize>) -> String {
    resplit.map(|r| format!(", resplit {r}")).unwrap_or_default()
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn dimension(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
