use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MilpError {
    #[error("unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("variable {0} is not binary")]
    NotBinary(String),
    #[error("binary {0} already gates a complementarity pair")]
    DuplicatePair(String),
    #[error("complementarity pair on {0} needs positive scales")]
    InvalidScale(String),
    #[error("{0} has invalid bounds")]
    InvalidBounds(String),
    #[error("{0} has a non-finite coefficient")]
    NonFinite(String),
    #[error("warm start rejected: {0}")]
    WarmStart(String),
}
