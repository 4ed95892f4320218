use thiserror::Error;

/// Parse failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: {msg}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl SyntaxError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> Self {
        SyntaxError { line, col, msg: msg.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("malformed constraint: predicate `{pred}` used with arity {found}, previously {expected}")]
    ArityClash { pred: String, expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("no quiescence after {budget} internal steps; last active sub-process: {culprit}")]
    NonQuiescent { budget: usize, culprit: String },
    #[error("step budget must be at least 1")]
    ZeroBudget,
    #[error("run needs at least one time unit")]
    ZeroUnits,
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("type mismatch: {0}")]
    Type(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HvkError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("unbound process variable `{0}`")]
    UnboundProcessVar(String),
    #[error("process variable `{name}` expects {expected} arguments, got {found}")]
    CallArity { name: String, expected: usize, found: usize },
    #[error("recursion unfolding did not reach a prefix after {0} steps")]
    UnguardedRecursion(usize),
    #[error("no redex, conditional or unfolding applies")]
    Stuck,
    #[error("non-deterministic program: {}", .conflicts.join("; "))]
    NonDeterministic { conflicts: Vec<String> },
    #[error("ill-formed program: {0}")]
    IllFormed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("`{0}` is an HVK+ construct; enable the timed encoding")]
    TimedConstruct(&'static str),
    #[error("unknown process variable `{0}`")]
    UnknownProcessVar(String),
    #[error("`{0}` may only appear in an accept precondition")]
    DurationOutsidePrecondition(String),
    #[error("session duration must be a constant integer >= 1, got `{0}`")]
    BadDuration(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("traces have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("trace line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}
