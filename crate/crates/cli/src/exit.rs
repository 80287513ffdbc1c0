use std::fmt;

use gilbert_core::Error;

pub const USAGE: i32 = 1;
pub const UNPHYSICAL: i32 = 2;
pub const NUMERIC: i32 = 3;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn unphysical(message: impl Into<String>) -> Self {
        Failure {
            code: UNPHYSICAL,
            message: message.into(),
        }
    }

    /// Errors raised while building the input state.
    pub fn from_state_error(e: Error) -> Self {
        match e {
            Error::Unphysical(_)
            | Error::InvalidDensityMatrix(_)
            | Error::NotHermitian(_)
            | Error::Unnormalized(_) => Failure::unphysical(e.to_string()),
            other => Failure::usage(other.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) | Error::NotHermitian(_) => NUMERIC,
            Error::Unphysical(_) | Error::InvalidDensityMatrix(_) | Error::Unnormalized(_) => {
                UNPHYSICAL
            }
            _ => USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
