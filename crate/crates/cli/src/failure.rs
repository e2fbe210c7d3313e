use std::fmt;

use valleyscope_core::Error;

/// Checks ran and found a violation.
pub const EXIT_VIOLATION: u8 = 1;
/// Unreadable, malformed or out-of-contract input.
pub const EXIT_INPUT: u8 = 2;
/// An internal assertion failed.
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Internal(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Exponent(_)
            | Error::Coefficient(_)
            | Error::Parse(_)
            | Error::NoStates
            | Error::DuplicateState(_)
            | Error::DuplicateBond(..)
            | Error::SelfLoop(_)
            | Error::UnknownState(_)
            | Error::Bond { .. }
            | Error::NotIrreducible(_)
            | Error::Epsilon(_)
            | Error::InvalidSets(_)
            | Error::TooFewValleys
            | Error::Precondition(_)
            | Error::Io(_) => Failure::Input(message),
            Error::DivisionByZero
            | Error::NotInSubset(_)
            | Error::ZeroOutRate(_)
            | Error::EmptySubset
            | Error::Singular
            | Error::NotStationary(_)
            | Error::NegativeResidual(..)
            | Error::NoPositiveArrow
            | Error::Undecomposable
            | Error::InfiniteLimit(_)
            | Error::Invariant(_) => Failure::Internal(message),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Internal(format!("serialization failed: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_error_kind() {
        assert_eq!(Failure::from(Error::NotIrreducible("2".into())).code(), EXIT_INPUT);
        assert_eq!(Failure::from(Error::Epsilon(2.0)).code(), EXIT_INPUT);
        assert_eq!(Failure::from(Error::Undecomposable).code(), EXIT_INTERNAL);
        assert_eq!(Failure::from(Error::Invariant("x".into())).code(), EXIT_INTERNAL);
    }
}
