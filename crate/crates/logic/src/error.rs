use thiserror::Error;

/// Parse-time failures, with the 1-based source position where known.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("builtin {name}/{expected} used with arity {found} at {line}:{col}")]
    Arity { name: String, expected: usize, found: usize, line: usize, col: usize },
    #[error("clause head redefines builtin {name}/{arity} at {line}:{col}")]
    ReservedHead { name: String, arity: usize, line: usize, col: usize },
}

/// Runtime failures raised during resolution.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("resolution depth exceeded limit of {limit}")]
    DepthExceeded { limit: usize },
    #[error("negated literal is not ground at evaluation time: {goal}")]
    NonGroundNegation { goal: String },
    #[error("arithmetic argument is not ground: {expr}")]
    NonGroundArithmetic { expr: String },
    #[error("unknown arithmetic functor {functor}/{arity}")]
    UnknownArithmetic { functor: String, arity: usize },
    #[error("cannot assert non-ground fact: {fact}")]
    NonGroundFact { fact: String },
    #[error("fact is not a callable term: {fact}")]
    NotCallable { fact: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogicError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
