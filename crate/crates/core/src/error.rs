use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model hyperparameter is outside its admissible range.
    InvalidConfig(&'static str),
    /// Potential `index` has a non-finite mean or a zero/NaN variance.
    InvalidPotential { index: usize },
    IndexOutOfRange { index: usize, len: usize },
    /// Dense oracle was asked for a chain longer than it supports.
    TooLong { len: usize, max: usize },
    LengthMismatch { expected: usize, found: usize },
    UnknownItem(String),
    UnknownParam(String),
    /// A value or gradient went non-finite; names the first offending parameter.
    NonFinite { param: String },
    /// A statistic is undefined for the given input (zero variance, single class, ...).
    Undefined(&'static str),
    WrongVariant { expected: &'static str, found: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
            Error::InvalidPotential { index } => {
                write!(f, "ability potential {index} has non-finite parameters")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::TooLong { len, max } => {
                write!(f, "chain length {len} exceeds the dense oracle bound {max}")
            }
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::UnknownItem(id) => write!(f, "unknown item `{id}`"),
            Error::UnknownParam(name) => write!(f, "unknown parameter array `{name}`"),
            Error::NonFinite { param } => write!(f, "non-finite value or gradient at `{param}`"),
            Error::Undefined(what) => write!(f, "undefined: {what}"),
            Error::WrongVariant { expected, found } => {
                write!(f, "model variant `{found}` cannot be used here (expected {expected})")
            }
        }
    }
}

impl core::error::Error for Error {}
