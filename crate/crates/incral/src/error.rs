//! Error types shared across the toolkit.

use thiserror::Error;

/// Syntax error with source position.
#[derive(Debug, Clone, Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }
}

/// Runtime errors raised by the interpreter.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("head of empty list")]
    HeadOfEmpty,
    #[error("tail of empty list")]
    TailOfEmpty,
    #[error("division by zero")]
    DivByZero,
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("function `{name}` expects {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("step limit exceeded ({0} charged units)")]
    StepLimit(u64),
    #[error("strict-change violation: add of present element to `{0}`")]
    StrictAdd(String),
    #[error("strict-change violation: delete of absent element from `{0}`")]
    StrictDel(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("tuple component {index} out of range for arity {arity}")]
    ProjRange { index: usize, arity: usize },
}

/// Failures of the program transformations.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("no differencing rule for {op} under {update}")]
    NoRule { op: String, update: String },
    #[error("increment not detectable for `{func}`: {reason}")]
    NoIncrement { func: String, reason: String },
    #[error("incremental form of `{func}` still contains recursive calls at offsets {residuals:?}; needs cache_closure")]
    NeedsCacheClosure { func: String, residuals: Vec<String> },
    #[error("cache depth exceeded (bound {bound}) while closing `{func}`")]
    CacheDepthExceeded { func: String, bound: usize },
    #[error("not a polynomial expression: {0}")]
    NotPolynomial(String),
    #[error("invariant `{name}` is not a set or aggregate expression")]
    NotSetExpr { name: String },
    #[error("duplicate operand variable `{var}` in elementary expression of `{inv}`")]
    DuplicateOperand { inv: String, var: String },
    #[error("unsupported rule set: {0}")]
    UnsupportedRules(String),
    #[error("{0}")]
    Other(String),
}
