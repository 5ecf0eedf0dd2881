use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "resource budget exceeded: {what} needs {count} entries but the budget is {budget}; \
         supply the distribution in product form, e.g. \"(a,b)x(c,d)\", so factors are merged instead"
    )]
    Budget {
        what: String,
        count: u128,
        budget: u128,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("spectrum cache {path}: corrupted or truncated file ({reason})")]
    CacheIntegrity { path: PathBuf, reason: String },

    #[error(
        "spectrum cache {path}: format version {found} is not supported (expected {expected})"
    )]
    CacheVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("spectrum cache {path}: stored base distribution hash does not match the requested distribution")]
    CacheHashMismatch { path: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
