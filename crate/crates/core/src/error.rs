use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDimension(usize),
    #[error("invalid scale {0}: must be positive")]
    InvalidScale(f64),
    #[error("derivative order {requested} exceeds available order {available}")]
    OrderExceeded { requested: usize, available: usize },
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("degenerate test function: integral {0:e} is too close to zero")]
    DegenerateTestFunction(f64),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("branch error: {0}")]
    Branch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid exponent: {0}")]
    Exponent(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
