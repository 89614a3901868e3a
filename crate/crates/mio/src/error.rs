use thiserror::Error;

use crate::mip::MipSolution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model has no variables")]
    Empty,
    #[error("variable `{var}` has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { var: String, lower: f64, upper: f64 },
    #[error("`{context}` references unknown variable index {index}")]
    UnknownVariable { context: String, index: usize },
    #[error("row `{row}` lists variable `{var}` twice")]
    DuplicateVariable { row: String, var: String },
    #[error("row `{row}` has a non-finite coefficient or right-hand side")]
    NonFinite { row: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Error)]
pub enum MipError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("gap tolerance must be non-negative, got {0}")]
    InvalidGap(f64),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("time limit reached after {nodes} nodes")]
    TimeLimit {
        nodes: usize,
        incumbent: Option<Box<MipSolution>>,
    },
}

#[derive(Debug, Error)]
pub enum LpFileError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl LpFileError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        LpFileError::Parse {
            line,
            message: message.into(),
        }
    }
}
