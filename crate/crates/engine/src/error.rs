use lob_core::ValidationReport;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("`{0}` is not bound")]
    Unbound(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("`{op}` takes {expected} operand(s), got {got}")]
    Arity { op: String, expected: String, got: usize },
    #[error("`{op}` expected {expected}, got {found}")]
    TypeMismatch { op: String, expected: String, found: String },
    #[error("`{0}` is actional and cannot be evaluated")]
    NotFunctional(String),
    #[error("`{0}` is functional and cannot be used as an action")]
    NotActional(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("integer overflow in `{0}`")]
    Overflow(String),
    #[error("`{0}` produced a non-finite decimal")]
    NonFinite(String),
    #[error("`{0}` cannot be written to")]
    NotADestination(String),
    #[error("{0}")]
    Refused(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("`{0}` is already defined")]
    Duplicate(String),
    #[error("operator `{name}` is malformed:\n{report}")]
    Invalid { name: String, report: ValidationReport },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("rule `{rule}` failed: {source}")]
    ActionFailed { rule: String, source: EvalError },
    #[error("malformed trace line {line}: {reason}")]
    Trace { line: usize, reason: String },
}
