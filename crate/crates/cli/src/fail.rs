//! Command failures and their process exit codes.

use std::fmt;

use a3tgcn::Error;

/// Bad flags, config values or a checkpoint that does not fit the graph.
pub const EXIT_CONFIG: u8 = 2;
/// Unreadable or malformed input data.
pub const EXIT_DATA: u8 = 3;
/// Training produced a non-finite loss.
pub const EXIT_NON_FINITE: u8 = 4;
/// Anything else, including a failed gradient check.
pub const EXIT_OTHER: u8 = 1;

#[derive(Debug)]
pub struct Fail {
    pub code: u8,
    pub message: String,
}

impl Fail {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(EXIT_DATA, message)
    }

    pub fn other(message: impl Into<String>) -> Self {
        Self::new(EXIT_OTHER, message)
    }

    /// Maps a library error, using `fallback` for contract and shape errors.
    pub fn from_core(err: Error, fallback: u8) -> Self {
        let code = match err {
            Error::NonFinite { .. } => EXIT_NON_FINITE,
            Error::Parse { .. } | Error::Io { .. } => EXIT_DATA,
            _ => fallback,
        };
        Self::new(code, err.to_string())
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CmdResult<T = ()> = Result<T, Fail>;

/// `.or_fail(code)?` for library results.
pub trait OrFail<T> {
    fn or_fail(self, code: u8) -> CmdResult<T>;
}

impl<T> OrFail<T> for a3tgcn::Result<T> {
    fn or_fail(self, code: u8) -> CmdResult<T> {
        self.map_err(|e| Fail::from_core(e, code))
    }
}
