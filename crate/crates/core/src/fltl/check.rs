//! Bounded checks of temporal properties against finite traces.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::constraint::{match_abstraction, parse_constraint, Constraint, Term};
use crate::error::SyntaxError;
use crate::utcc::{Trace, UnitOutput};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// First unit, counted from 1, whose store entails the constraint.
    HoldsAt(usize),
    /// No unit among the first `n` entails it.
    NotWithinBound(usize),
}

/// `<>d` over the first `bound` units (all of them when `None`).
pub fn check_eventually(trace: &Trace, d: &Constraint, bound: Option<usize>) -> Verdict {
    let n = prefix_len(trace, bound);
    match trace.outputs[..n].iter().position(|u| u.entails(d)) {
        Some(i) => Verdict::HoldsAt(i + 1),
        None => Verdict::NotWithinBound(n),
    }
}

fn prefix_len(trace: &Trace, bound: Option<usize>) -> usize {
    bound.map_or(trace.outputs.len(), |b| b.min(trace.outputs.len()))
}

/// Distinct session names `k` with `acc(service, k)` or `sess(service, k)`
/// in some unit.
pub fn acceptance_counter(trace: &Trace, service: &str) -> usize {
    acceptances_upto(&trace.outputs, service).len()
}

fn acceptances_upto(units: &[UnitOutput], service: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    for u in units {
        for a in &u.atoms {
            if (a.pred == "acc" || a.pred == "sess")
                && a.args.len() == 2
                && matches!(&a.args[0], Term::Const(crate::constraint::Value::Sym(s)) if s == service)
            {
                seen.insert(a.args[1].to_string());
            }
        }
    }
    seen
}

/// A property template as read from a line of JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub parameters: serde_json::Value,
    #[serde(default)]
    pub bound: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TemplateKind {
    Exists(Constraint),
    Absence(Constraint),
    CountAtLeast {
        service: String,
        count: usize,
    },
    /// Whenever `trigger` holds for some instance of `vars`, `response`
    /// holds for the same instance in that unit or a later one.
    RespondedExistence {
        vars: Vec<String>,
        trigger: Constraint,
        response: Constraint,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: String,
    pub kind: TemplateKind,
    pub bound: Option<usize>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TemplateError {
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("template `{name}`: {message}")]
    Parameters { name: String, message: String },
    #[error("template `{name}`: {source}")]
    Syntax { name: String, source: SyntaxError },
}

impl Template {
    pub fn from_spec(spec: &TemplateSpec) -> Result<Template, TemplateError> {
        let bad = |message: &str| TemplateError::Parameters { name: spec.name.clone(), message: message.into() };
        let p = &spec.parameters;
        let text =
            |key: &str| p.get(key).and_then(|v| v.as_str()).ok_or_else(|| bad(&format!("missing string `{key}`")));
        let parse = |src: &str, scope: &[String]| {
            parse_constraint(src, scope).map_err(|source| TemplateError::Syntax { name: spec.name.clone(), source })
        };
        let kind = match spec.kind.as_str() {
            "exists" => TemplateKind::Exists(parse(text("constraint")?, &[])?),
            "absence" => TemplateKind::Absence(parse(text("constraint")?, &[])?),
            "count_at_least" => TemplateKind::CountAtLeast {
                service: text("service")?.to_string(),
                count: p.get("count").and_then(|v| v.as_u64()).ok_or_else(|| bad("missing integer `count`"))? as usize,
            },
            "responded_existence" => {
                let vars: Vec<String> = match p.get("vars") {
                    None => Vec::new(),
                    Some(v) => serde_json::from_value(v.clone()).map_err(|_| bad("`vars` must be a list of names"))?,
                };
                TemplateKind::RespondedExistence {
                    trigger: parse(text("trigger")?, &vars)?,
                    response: parse(text("response")?, &vars)?,
                    vars,
                }
            }
            other => return Err(bad(&format!("unknown kind `{other}`"))),
        };
        Ok(Template { name: spec.name.clone(), kind, bound: spec.bound })
    }
}

/// One template per non-blank line.
pub fn parse_templates(src: &str) -> Result<Vec<Template>, TemplateError> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let spec: TemplateSpec =
                serde_json::from_str(l).map_err(|e| TemplateError::Json { line: i + 1, message: e.to_string() })?;
            Template::from_spec(&spec)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    /// Witnessed within the prefix.
    Holds,
    /// Nothing in the prefix contradicts it; a longer run might.
    HoldsWithinBound,
    Violated,
    NotWithinBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateVerdict {
    pub template: String,
    pub verdict: VerdictKind,
    /// Counted from 1, like trace units.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_unit: Option<usize>,
    pub bound: usize,
}

pub fn check_template(trace: &Trace, t: &Template) -> TemplateVerdict {
    let bound = prefix_len(trace, t.bound);
    let units = &trace.outputs[..bound];
    let (verdict, witness_unit) = match &t.kind {
        TemplateKind::Exists(d) => match check_eventually(trace, d, Some(bound)) {
            Verdict::HoldsAt(i) => (VerdictKind::Holds, Some(i)),
            Verdict::NotWithinBound(_) => (VerdictKind::NotWithinBound, None),
        },
        TemplateKind::Absence(d) => match units.iter().position(|u| u.entails(d)) {
            Some(i) => (VerdictKind::Violated, Some(i + 1)),
            None => (VerdictKind::HoldsWithinBound, None),
        },
        TemplateKind::CountAtLeast { service, count } => {
            match (0..=bound).find(|&i| acceptances_upto(&units[..i], service).len() >= *count) {
                Some(0) => (VerdictKind::Holds, None),
                Some(i) => (VerdictKind::Holds, Some(i)),
                None => (VerdictKind::NotWithinBound, None),
            }
        }
        TemplateKind::RespondedExistence { vars, trigger, response } => responded(units, vars, trigger, response),
    };
    TemplateVerdict { template: t.name.clone(), verdict, witness_unit, bound }
}

fn responded(
    units: &[UnitOutput],
    vars: &[String],
    trigger: &Constraint,
    response: &Constraint,
) -> (VerdictKind, Option<usize>) {
    let mut last_response = None;
    for (i, u) in units.iter().enumerate() {
        for sigma in match_abstraction(&u.store(), vars, trigger, &[]) {
            let wanted = response.subst_map(&sigma);
            match units[i..].iter().position(|v| v.entails(&wanted)) {
                Some(j) => last_response = last_response.max(Some(i + j + 1)),
                // The response may still come after the bound.
                None => return (VerdictKind::NotWithinBound, Some(i + 1)),
            }
        }
    }
    match last_response {
        Some(j) => (VerdictKind::Holds, Some(j)),
        None => (VerdictKind::HoldsWithinBound, None),
    }
}

pub fn verdicts_to_jsonl(vs: &[TemplateVerdict]) -> String {
    vs.iter().map(|v| serde_json::to_string(v).expect("verdicts serialize") + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utcc::{parse_process, run};

    fn trace(src: &str, units: usize) -> Trace {
        run(&parse_process(src).unwrap(), units, &[]).unwrap()
    }

    fn c(src: &str) -> Constraint {
        parse_constraint(src, &[]).unwrap()
    }

    #[test]
    fn eventually_finds_first_unit() {
        let t = trace("next next tell(done)", 4);
        assert_eq!(check_eventually(&t, &c("done"), None), Verdict::HoldsAt(3));
        assert_eq!(check_eventually(&t, &c("done"), Some(2)), Verdict::NotWithinBound(2));
        assert_eq!(check_eventually(&t, &c("other"), Some(10)), Verdict::NotWithinBound(4));
    }

    #[test]
    fn eventually_through_hidden_names() {
        let t = trace("(local k) next tell(acc(s, k))", 3);
        assert_eq!(check_eventually(&t, &c("exists k. acc(s, k)"), None), Verdict::HoldsAt(2));
    }

    #[test]
    fn counter_counts_distinct_sessions() {
        let t = trace("(local k) !tell(acc(s, k)) || (local j) next tell(sess(s, j)) || tell(acc(r, a))", 3);
        assert_eq!(acceptance_counter(&t, "s"), 2);
        assert_eq!(acceptance_counter(&t, "r"), 1);
        assert_eq!(acceptance_counter(&t, "q"), 0);
    }

    fn check(src: &str, units: usize, line: &str) -> TemplateVerdict {
        check_template(&trace(src, units), &parse_templates(line).unwrap()[0])
    }

    #[test]
    fn template_kinds() {
        let p = "(local k) (tell(acc(s, k)) || next tell(out(k, 5)))";
        let v =
            check(p, 3, r#"{"name":"e","kind":"exists","parameters":{"constraint":"exists k. out(k, 5)"},"bound":3}"#);
        assert_eq!((v.verdict, v.witness_unit), (VerdictKind::Holds, Some(2)));
        let v = check(p, 3, r#"{"name":"a","kind":"absence","parameters":{"constraint":"exists k. out(k, 6)"}}"#);
        assert_eq!((v.verdict, v.bound), (VerdictKind::HoldsWithinBound, 3));
        let v = check(p, 3, r#"{"name":"a","kind":"absence","parameters":{"constraint":"exists k. out(k, 5)"}}"#);
        assert_eq!((v.verdict, v.witness_unit), (VerdictKind::Violated, Some(2)));
        let v = check(p, 3, r#"{"name":"n","kind":"count_at_least","parameters":{"service":"s","count":1}}"#);
        assert_eq!((v.verdict, v.witness_unit), (VerdictKind::Holds, Some(1)));
        let v = check(p, 3, r#"{"name":"n","kind":"count_at_least","parameters":{"service":"s","count":2}}"#);
        assert_eq!(v.verdict, VerdictKind::NotWithinBound);
    }

    #[test]
    fn responses_pair_by_shared_terms() {
        let line = r#"{"name":"r","kind":"responded_existence","parameters":{"vars":["k","o"],"trigger":"out(k, o) & o.price <= 1500","response":"out(k, ok)"}}"#;
        let good = "(local k) (tell(out(k, {price: 1200})) || next next tell(out(k, ok)))";
        let v = check(good, 4, line);
        assert_eq!((v.verdict, v.witness_unit), (VerdictKind::Holds, Some(3)));
        // The answer goes to a different session.
        let bad = "(local k, j) (tell(out(k, {price: 1200})) || next tell(out(j, ok)))";
        assert_eq!(check(bad, 4, line).verdict, VerdictKind::NotWithinBound);
        // No offer below the threshold: nothing to answer.
        let v = check("(local k) tell(out(k, {price: 1800}))", 2, line);
        assert_eq!((v.verdict, v.witness_unit), (VerdictKind::HoldsWithinBound, None));
    }

    #[test]
    fn malformed_templates() {
        assert!(matches!(parse_templates("{"), Err(TemplateError::Json { line: 1, .. })));
        assert!(matches!(parse_templates(r#"{"name":"x","kind":"sometimes"}"#), Err(TemplateError::Parameters { .. })));
        assert!(matches!(
            parse_templates(r#"{"name":"x","kind":"exists","parameters":{"constraint":"acc("}}"#),
            Err(TemplateError::Syntax { .. })
        ));
    }

    #[test]
    fn verdict_lines() {
        let v = TemplateVerdict {
            template: "t".into(),
            verdict: VerdictKind::NotWithinBound,
            witness_unit: None,
            bound: 20,
        };
        assert_eq!(verdicts_to_jsonl(&[v]), "{\"template\":\"t\",\"verdict\":\"not_within_bound\",\"bound\":20}\n");
    }
}
