//! Temporal formulas read off processes, and bounded checks over traces.

mod check;
mod formula;

pub use check::{
    acceptance_counter, check_eventually, check_template, parse_templates, verdicts_to_jsonl, Template, TemplateError,
    TemplateKind, TemplateSpec, TemplateVerdict, Verdict, VerdictKind,
};
pub use formula::{extract, syntactically_eventually, Formula};
