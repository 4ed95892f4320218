//! Lockstep comparison of outermost HVK rounds against the utcc run of the
//! encoded program.
//!
//! Unit `i` (from 1) is compared with the HVK state reached after `i - 1`
//! rounds. The state is decoded into the atoms its pending actions put in
//! the store during one unit:
//!
//! | thread in the state           | decoded atoms                      |
//! |-------------------------------|------------------------------------|
//! | `request a(k) in P`, linked   | `req(a, k')`, `acc(a, k')`          |
//! | `request a(k) in P`, unlinked | `req(a, k')`                       |
//! | `k![e1..en] P`                | `out(k, v)`, `v` the evaluated payload |
//! | `k <| l; P`                   | `sel(k, l)`                        |
//! | `throw k![j] P`               | `outk(k, j)`                       |
//! | anything else                 | nothing                            |
//!
//! `k'` is a fresh hidden name. On the utcc side the handshake atoms
//! `out'`, every `ack_*`, every `call_*` and the timing atoms `act`,
//! `kill`, `sess` are erased before comparing by mutual entailment.

use serde::Serialize;

use sesscc_core::constraint::{is_generated, Atom, Constraint, Term};
use sesscc_core::encode::{encode, EncodingContext, Predicates};
use sesscc_core::hvk::{eval_expr, find_redexes, HvkProcess, HvkState, Rule};
use sesscc_core::utcc::{Engine, EngineOptions, Process, UnitOutput, OUT_PRIME};
use sesscc_core::{EncodeError, EngineError, HvkError};

#[derive(Debug, thiserror::Error)]
pub enum CorrespondError {
    #[error("correspondence is checked for untimed programs only")]
    Timed,
    #[error(transparent)]
    Hvk(#[from] HvkError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorrespondenceRow {
    pub unit: usize,
    /// HVK threads after `unit - 1` rounds.
    pub hvk_threads: Vec<String>,
    pub decoded: Vec<String>,
    pub observed: Vec<String>,
    pub agree: bool,
    /// Rules fired by the round leading out of this state.
    pub fired_rules: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorrespondenceReport {
    pub rows: Vec<CorrespondenceRow>,
    pub first_divergence: Option<usize>,
}

impl CorrespondenceReport {
    pub fn agrees(&self) -> bool {
        self.first_divergence.is_none()
    }

    /// Rules fired across all compared rounds.
    pub fn rules(&self) -> Vec<String> {
        self.rows.iter().flat_map(|r| r.fired_rules.iter().cloned()).collect()
    }
}

fn chan(n: &str) -> Term {
    if is_generated(n) {
        Term::var(n)
    } else {
        Term::sym(n)
    }
}

/// The atoms a state's pending actions contribute to one unit.
pub fn decode_state(threads: &[HvkProcess], preds: &Predicates) -> Result<UnitOutput, HvkError> {
    let linked: Vec<usize> =
        find_redexes(threads).pairs.iter().filter(|r| r.rule == Rule::Link).flat_map(|r| [r.left, r.right]).collect();
    let mut atoms = Vec::new();
    for (i, t) in threads.iter().enumerate() {
        match t {
            HvkProcess::Request { service, .. } => {
                let k = Term::var(format!("k'#{i}"));
                atoms.push(Atom::new(&preds.req, vec![chan(service), k.clone()]));
                if linked.contains(&i) {
                    atoms.push(Atom::new(&preds.acc, vec![chan(service), k]));
                }
            }
            HvkProcess::Send { chan: k, exprs, .. } => {
                let mut vs = exprs.iter().map(|e| eval_expr(e, &Default::default())).collect::<Result<Vec<_>, _>>()?;
                let payload = if vs.len() == 1 { vs.pop().unwrap() } else { Term::Tuple(vs) };
                atoms.push(Atom::new(&preds.out, vec![chan(k), payload]));
            }
            HvkProcess::Select { chan: k, label, .. } => {
                atoms.push(Atom::new(&preds.sel, vec![chan(k), Term::sym(label)]))
            }
            HvkProcess::Throw { chan: k, sent, .. } => atoms.push(Atom::new(&preds.outk, vec![chan(k), chan(sent)])),
            _ => {}
        }
    }
    Ok(UnitOutput::new(atoms, Vec::new(), Vec::new(), false))
}

/// Predicates that carry no HVK-visible information.
pub fn erased(pred: &str, preds: &Predicates) -> bool {
    pred == OUT_PRIME
        || pred.starts_with("ack_")
        || pred.starts_with(&preds.call_prefix)
        || pred == preds.act
        || pred == preds.kill
        || pred == preds.sess
}

pub type Encoder<'a> = &'a dyn Fn(&HvkProcess) -> Result<Process, EncodeError>;

/// Runs `rounds` HVK rounds and as many utcc units of the encoding.
pub fn correspond(p: &HvkProcess, rounds: usize, budget: usize) -> Result<CorrespondenceReport, CorrespondError> {
    correspond_with(p, rounds, budget, &|q| encode(q, &EncodingContext::untimed()))
}

pub fn correspond_with(
    p: &HvkProcess,
    rounds: usize,
    budget: usize,
    encoder: Encoder<'_>,
) -> Result<CorrespondenceReport, CorrespondError> {
    if p.is_timed() {
        return Err(CorrespondError::Timed);
    }
    let preds = Predicates::default();
    let utcc = encoder(p)?;
    let trace = Engine::new(EngineOptions { budget, ..Default::default() }).run(&utcc, rounds, &[])?;
    let (mut st, _) = HvkState::new(p)?;
    let mut rows = Vec::new();
    for (i, unit) in trace.outputs.iter().enumerate() {
        let decoded = decode_state(&st.nf.threads, &preds)?;
        let hvk_threads = st.nf.threads.iter().map(|t| t.to_string()).collect();
        let fired_rules = st.round()?.iter().map(Rule::to_string).collect();
        let observed = unit.filter_atoms(|q| !erased(q, &preds));
        rows.push(CorrespondenceRow {
            unit: i + 1,
            hvk_threads,
            agree: decoded.equivalent(&observed),
            decoded: decoded.atom_texts(),
            observed: observed.atom_texts(),
            fired_rules,
        });
    }
    let first_divergence = rows.iter().find(|r| !r.agree).map(|r| r.unit);
    Ok(CorrespondenceReport { rows, first_divergence })
}

/// Negative control: the encoding with `req` and `acc` exchanged in every
/// tell. A requester then answers its own request.
pub fn corrupted_encoding(p: &HvkProcess) -> Result<Process, EncodeError> {
    Ok(swap_told(&encode(p, &EncodingContext::untimed())?, "req", "acc"))
}

fn swap_told(p: &Process, a: &str, b: &str) -> Process {
    let go = |q: &Process| Box::new(swap_told(q, a, b));
    match p {
        Process::Tell(c) => Process::Tell(swap_preds(c, a, b)),
        Process::PTell(c) => Process::PTell(swap_preds(c, a, b)),
        Process::Skip => Process::Skip,
        Process::Par(ps) => Process::Par(ps.iter().map(|q| swap_told(q, a, b)).collect()),
        Process::Abs { binders, guard, body, exclusions } => Process::Abs {
            binders: binders.clone(),
            guard: guard.clone(),
            body: go(body),
            exclusions: exclusions.clone(),
        },
        Process::Local { vars, init, body } => {
            Process::Local { vars: vars.clone(), init: init.clone(), body: go(body) }
        }
        Process::Next(q) => Process::Next(go(q)),
        Process::Unless { guard, body } => Process::Unless { guard: guard.clone(), body: go(body) },
        Process::Bang(q) => Process::Bang(go(q)),
        Process::BangN(n, q) => Process::BangN(*n, go(q)),
        Process::Wait { binders, guard, body } => {
            Process::Wait { binders: binders.clone(), guard: guard.clone(), body: go(body) }
        }
        Process::WaitAck { binders, guard, body } => {
            Process::WaitAck { binders: binders.clone(), guard: guard.clone(), body: go(body) }
        }
    }
}

fn swap_preds(c: &Constraint, a: &str, b: &str) -> Constraint {
    match c {
        Constraint::Atom(at) => {
            let pred = if at.pred == a {
                b
            } else if at.pred == b {
                a
            } else {
                &at.pred
            };
            Constraint::Atom(Atom::new(pred, at.args.clone()))
        }
        Constraint::And(cs) => Constraint::And(cs.iter().map(|x| swap_preds(x, a, b)).collect()),
        Constraint::Exists(vs, body) => Constraint::Exists(vs.clone(), Box::new(swap_preds(body, a, b))),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sesscc_core::hvk::parse;

    const LINK_COM: &str = "request a(k) in k![1] k?(y) in 0 | accept a(k) in k?(x) in k![x + 1] 0";

    #[test]
    fn link_then_two_exchanges() {
        let r = correspond(&parse(LINK_COM).unwrap(), 4, 10_000).unwrap();
        assert!(r.agrees(), "{r:#?}");
        assert_eq!(r.rules(), ["Link", "Com", "Com"]);
        assert_eq!(r.rows[1].decoded, ["out(k#1,1)"]);
    }

    #[test]
    fn corrupted_encoding_diverges_first() {
        let r = correspond_with(&parse(LINK_COM).unwrap(), 3, 10_000, &corrupted_encoding).unwrap();
        assert_eq!(r.first_divergence, Some(1));
    }

    #[test]
    fn unmatched_request_persists() {
        let r = correspond(&parse("request a(k) in 0").unwrap(), 3, 10_000).unwrap();
        assert!(r.agrees());
        assert!(r.rows.iter().all(|row| row.decoded.len() == 1));
    }

    #[test]
    fn ambiguous_programs_are_rejected() {
        let p = parse("k![1] 0 | k![2] 0 | k?(x) in 0").unwrap();
        assert!(matches!(correspond(&p, 2, 10_000), Err(CorrespondError::Hvk(HvkError::NonDeterministic { .. }))));
    }
}
