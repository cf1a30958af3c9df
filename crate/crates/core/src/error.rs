use thiserror::Error;

use crate::eval::EvalResult;
use crate::model::Violation;
use crate::special::SpecialError;

pub type Result<T, E = HornError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HornError {
    #[error("pole: {0}")]
    Pole(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("invalid series: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("series did not converge within {} shells (tail estimate {:e})", .0.shells_used, .0.tail_estimate)]
    NotConverged(EvalResult),

    #[error("{family} expects {expected}, got {found}")]
    Arity {
        family: String,
        expected: String,
        found: String,
    },

    #[error("unknown catalog function `{0}`")]
    UnknownFunction(String),

    #[error("expansion member {index}: {source}")]
    Member {
        index: usize,
        #[source]
        source: Box<HornError>,
    },

    #[error("invalid evaluation options: {0}")]
    Options(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
}

impl HornError {
    /// True for numerical failures (poles, non-convergence), false for
    /// structural or input problems.
    pub fn is_numerical(&self) -> bool {
        match self {
            HornError::Pole(_) | HornError::NotConverged(_) => true,
            HornError::Member { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<SpecialError> for HornError {
    fn from(e: SpecialError) -> Self {
        HornError::Pole(e.to_string())
    }
}

impl From<serde_json::Error> for HornError {
    fn from(e: serde_json::Error) -> Self {
        HornError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
