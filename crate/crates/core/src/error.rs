// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("window out of range: {0}")]
    InvalidWindow(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("changepoint {0} was not detected on the observed series")]
    NotDetected(usize),

    #[error("no penalty yields exactly {target} changepoints (nearest achievable: {below} and {above})")]
    CountUnreachable {
        target: usize,
        below: usize,
        above: usize,
    },

    #[error("selection set exceeded {0} certified intervals")]
    IterationCap(usize),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
