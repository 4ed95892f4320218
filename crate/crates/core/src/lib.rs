//! Session calculi, their encoding into timed concurrent constraint
//! programs, and temporal verification over the resulting traces.

pub mod constraint;
pub mod encode;
pub mod error;
pub mod fltl;
pub mod hvk;
pub mod lexer;
pub mod utcc;

pub use constraint::{Atom, Constraint, Store, Substitution, Term, Value};
pub use error::{ConstraintError, EncodeError, EngineError, EvalError, HvkError, SyntaxError, TraceError};
