use std::fmt;

use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

/// Why a policy cannot be compiled.
#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum GuardError {
    #[error("policy is not full: ED #{index} has existential head variables ({vars})")]
    NotFull { index: usize, vars: String },
    #[error("policy is not expandable: neither linear nor acyclic; P-edge cycle {cycle}")]
    NotExpandable { cycle: String },
    #[error("ED #{index} is not binary")]
    NotBinary { index: usize },
}

#[derive(Debug, Error)]
pub enum CqeError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("arity mismatch for `{name}`: {detail}")]
    Arity { name: String, detail: String },
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error("TBox and ABox are inconsistent: {0}")]
    Inconsistent(String),
    #[error("closure has {size} facts, above the oracle cap of {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("rewriting exceeded depth cap {cap}; predicates on the unbounded path: {preds}")]
    DepthExceeded { cap: usize, preds: String },
    #[error("formula is not safe-range: {0}")]
    NotSafeRange(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CqeError> = std::result::Result<T, E>;
