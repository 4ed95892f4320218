//! The HVK session language and its timed extension: syntax, normal forms
//! and the reference reduction semantics.

mod ast;
mod normal;
mod parser;
mod reduce;

pub use ast::{dur_var, Decl, HvkProcess, Subst};
pub use normal::{eval_bool, eval_expr, normal_form, NormalForm, UNFOLD_LIMIT};
pub use parser::{parse, parse_generated};
pub use reduce::{
    find_redexes, find_redexes_at, lint_accept_uniqueness, outermost_run, records_to_jsonl, reduce_step,
    session_clock_step, HvkState, Redex, Redexes, RoundRecord, Rule, Session, SessionTable,
};
