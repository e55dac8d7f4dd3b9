use thiserror::Error;

use crate::measures::Point;

/// One problem found while validating a scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line number, when the problem is tied to a line.
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}, `{}`: {}", self.field, self.message),
            None => write!(f, "`{}`: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("atom {index} mapped to ({}, {}), outside the unit box", .point[0], .point[1])]
    Range { index: usize, point: Point },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid transport map: {0}")]
    InvalidMap(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("problem too large for exhaustive search: {got} atoms, cap is {cap}")]
    Size { got: usize, cap: usize },

    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<ConfigIssue>),

    #[error("incompatible results: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
