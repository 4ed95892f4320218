//! Constraint system: terms, first-order formulas over predicates, and the
//! store that accumulates them.

mod formula;
pub mod search;
mod store;
pub mod term;
pub mod text;

pub use formula::{ack_pred, is_generated, Atom, Constraint, Fresh, Substitution};
pub use search::{exists_witness, first_match, match_abstraction};
pub use store::Store;
pub use term::{Op, Term, Value};
pub use text::{parse_constraint, parse_term};
