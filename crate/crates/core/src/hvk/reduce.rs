//! Redexes, single reduction steps, outermost rounds and the session clock
//! of timed programs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{dur_var, HvkProcess, Subst};
use super::normal::{eval_bool, eval_expr, NormalForm};
use crate::constraint::{Fresh, Store, Term, Value};
use crate::error::HvkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    Link,
    Com,
    Label,
    Pass,
    If1,
    If2,
    Def,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Link => "Link",
            Rule::Com => "Com",
            Rule::Label => "Label",
            Rule::Pass => "Pass",
            Rule::If1 => "If1",
            Rule::If2 => "If2",
            Rule::Def => "Def",
        };
        f.write_str(s)
    }
}

/// A complementary pair. `left` is the requesting/sending/selecting/throwing
/// side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Redex {
    pub rule: Rule,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Redexes {
    /// Sorted by `(min index, max index)`.
    pub pairs: Vec<Redex>,
    /// Threads admitting more than one partner.
    pub conflicts: Vec<usize>,
}

/// One granted timed session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Session {
    /// Round in which the session was established.
    pub start: u64,
    pub duration: u64,
    /// First round at which a kill takes effect.
    pub killed_from: Option<u64>,
}

impl Session {
    /// Active in rounds `start+1 ..= start+duration`, until killed.
    pub fn is_active(&self, round: u64) -> bool {
        round > self.start && round <= self.start + self.duration && self.killed_from.is_none_or(|k| round < k)
    }

    pub fn remaining(&self, round: u64) -> u64 {
        if !self.is_active(round) {
            return 0;
        }
        let end = self.start + self.duration;
        let end = self.killed_from.map_or(end, |k| end.min(k - 1));
        end + 1 - round
    }
}

/// Timed sessions by channel. Channels not in the table are untimed and
/// always usable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionTable {
    pub sessions: BTreeMap<String, Session>,
}

impl SessionTable {
    pub fn usable(&self, chan: &str, round: u64) -> bool {
        self.sessions.get(chan).is_none_or(|s| s.is_active(round))
    }
}

/// Records kills issued by the current threads at `round`; they take effect
/// from the next round.
pub fn session_clock_step(table: &mut SessionTable, threads: &[HvkProcess], round: u64) {
    for t in threads {
        if let HvkProcess::Kill(k) = t {
            if let Some(s) = table.sessions.get_mut(k) {
                if s.is_active(round) && s.killed_from.is_none() {
                    s.killed_from = Some(round + 1);
                }
            }
        }
    }
}

fn duration_of(e: &Term) -> Result<u64, HvkError> {
    match eval_expr(e, &HashMap::new())? {
        Term::Const(Value::Int(n)) if n >= 1 => Ok(n as u64),
        other => Err(HvkError::IllFormed(format!("session duration `{e}` evaluated to {other}"))),
    }
}

fn pair_rule(a: &HvkProcess, b: &HvkProcess) -> Option<Rule> {
    use HvkProcess::*;
    match (a, b) {
        (Request { service: s1, .. }, Accept { service: s2, .. }) if s1 == s2 => Some(Rule::Link),
        (TimedRequest { service: s1, duration, .. }, DeclAccept { service: s2, chan, precond, .. }) if s1 == s2 => {
            let m = eval_expr(duration, &HashMap::new()).ok()?;
            let dur = dur_var(chan);
            let c = precond.subst(&|v| (v == dur).then(|| m.clone()));
            Store::new().entails(&c).then_some(Rule::Link)
        }
        (Send { chan: k1, exprs, .. }, Receive { chan: k2, vars, .. }) if k1 == k2 && exprs.len() == vars.len() => {
            Some(Rule::Com)
        }
        (Select { chan: k1, label, .. }, Branch { chan: k2, branches }) if k1 == k2 => {
            branches.iter().any(|(l, _)| l == label).then_some(Rule::Label)
        }
        (Throw { chan: k1, .. }, Catch { chan: k2, .. }) if k1 == k2 => Some(Rule::Pass),
        _ => None,
    }
}

/// All complementary pairs among untimed-or-active threads.
pub fn find_redexes(threads: &[HvkProcess]) -> Redexes {
    find_redexes_at(threads, &SessionTable::default(), 0)
}

pub fn find_redexes_at(threads: &[HvkProcess], sessions: &SessionTable, round: u64) -> Redexes {
    let usable = |p: &HvkProcess| p.subject().is_none_or(|k| sessions.usable(k, round));
    let mut pairs = Vec::new();
    let mut partners = vec![0usize; threads.len()];
    for i in 0..threads.len() {
        if !usable(&threads[i]) {
            continue;
        }
        for j in i + 1..threads.len() {
            if !usable(&threads[j]) {
                continue;
            }
            let found = pair_rule(&threads[i], &threads[j])
                .map(|r| Redex { rule: r, left: i, right: j })
                .or_else(|| pair_rule(&threads[j], &threads[i]).map(|r| Redex { rule: r, left: j, right: i }));
            if let Some(r) = found {
                partners[i] += 1;
                partners[j] += 1;
                pairs.push(r);
            }
        }
    }
    let conflicts = partners.iter().enumerate().filter(|(_, n)| **n > 1).map(|(i, _)| i).collect();
    Redexes { pairs, conflicts }
}

/// Continuations of a fired pair, in `(left, right)` order.
fn fire(
    r: &Redex,
    threads: &[HvkProcess],
    fresh: &mut Fresh,
    nf_names: &mut Vec<String>,
    sessions: &mut SessionTable,
    round: u64,
) -> Result<(HvkProcess, HvkProcess), HvkError> {
    use HvkProcess::*;
    let (a, b) = (&threads[r.left], &threads[r.right]);
    Ok(match (a, b) {
        (Request { chan: k1, body: p, .. }, Accept { chan: k2, body: q, .. }) => {
            let c = fresh.var(k1);
            nf_names.push(c.clone());
            (p.rename(k1, &c), q.rename(k2, &c))
        }
        (TimedRequest { chan: k1, duration, body: p, .. }, DeclAccept { chan: k2, body: q, .. }) => {
            let c = fresh.var(k1);
            nf_names.push(c.clone());
            sessions
                .sessions
                .insert(c.clone(), Session { start: round, duration: duration_of(duration)?, killed_from: None });
            (p.rename(k1, &c), q.rename(k2, &c))
        }
        (Send { exprs, body: p, .. }, Receive { vars, body: q, .. }) => {
            let mut s = Subst::default();
            for (x, e) in vars.iter().zip(exprs) {
                s.data.insert(x.clone(), eval_expr(e, &HashMap::new())?);
            }
            ((**p).clone(), q.subst(&s))
        }
        (Select { label, body: p, .. }, Branch { branches, .. }) => {
            let chosen =
                branches.iter().find(|(l, _)| l == label).map(|(_, q)| q.clone()).expect("checked by pair_rule");
            ((**p).clone(), chosen)
        }
        (Throw { sent, body: p, .. }, Catch { bound, body: q, .. }) => ((**p).clone(), q.rename(bound, sent)),
        _ => unreachable!("redex shapes are checked by pair_rule"),
    })
}

fn fire_if(p: &HvkProcess) -> Result<Option<(Rule, HvkProcess)>, HvkError> {
    match p {
        HvkProcess::If { cond, then, els } => {
            Ok(Some(if eval_bool(cond)? { (Rule::If1, (**then).clone()) } else { (Rule::If2, (**els).clone()) }))
        }
        _ => Ok(None),
    }
}

/// A program state between rounds.
#[derive(Debug, Clone)]
pub struct HvkState {
    pub nf: NormalForm,
    pub fresh: Fresh,
    pub sessions: SessionTable,
    /// Rounds completed so far.
    pub round: u64,
    pub force_pairing: bool,
}

impl HvkState {
    /// The initial normal form, with the number of calls unfolded to reach it.
    pub fn new(p: &HvkProcess) -> Result<(HvkState, usize), HvkError> {
        let mut fresh = Fresh::new();
        if let Some(x) = p.free_proc_vars().into_iter().next() {
            return Err(HvkError::UnboundProcessVar(x));
        }
        let mut nf = NormalForm::default();
        let unfolded = nf.absorb(p.clone(), &mut fresh)?;
        Ok((HvkState { nf, fresh, sessions: SessionTable::default(), round: 0, force_pairing: false }, unfolded))
    }

    fn rebuild(&mut self, replaced: Vec<Vec<HvkProcess>>) -> Result<usize, HvkError> {
        let mut next = NormalForm { decls: self.nf.decls.clone(), names: self.nf.names.clone(), threads: Vec::new() };
        let mut unfolded = 0;
        for group in replaced {
            for p in group {
                unfolded += next.absorb(p, &mut self.fresh)?;
            }
        }
        self.nf = next;
        Ok(unfolded)
    }

    /// One outermost round: every conditional and every redex fires once,
    /// all from the state at the start of the round.
    pub fn round(&mut self) -> Result<Vec<Rule>, HvkError> {
        let round = self.round + 1;
        let threads = self.nf.threads.clone();
        session_clock_step(&mut self.sessions, &threads, round);
        let redexes = find_redexes_at(&threads, &self.sessions, round);
        if !redexes.conflicts.is_empty() && !self.force_pairing {
            return Err(HvkError::NonDeterministic { conflicts: describe_conflicts(&threads, &redexes) });
        }
        let mut out: Vec<Vec<HvkProcess>> = threads.iter().map(|t| vec![t.clone()]).collect();
        let mut busy = vec![false; threads.len()];
        let mut fired = Vec::new();
        for (i, t) in threads.iter().enumerate() {
            if let Some((rule, cont)) = fire_if(t)? {
                out[i] = vec![cont];
                busy[i] = true;
                fired.push(rule);
            }
        }
        for r in &redexes.pairs {
            if busy[r.left] || busy[r.right] {
                continue;
            }
            busy[r.left] = true;
            busy[r.right] = true;
            let (p, q) = fire(r, &threads, &mut self.fresh, &mut self.nf.names, &mut self.sessions, round)?;
            out[r.left] = vec![p];
            out[r.right] = vec![q];
            fired.push(r.rule);
        }
        let unfolded = self.rebuild(out)?;
        fired.extend(std::iter::repeat_n(Rule::Def, unfolded));
        self.round = round;
        Ok(fired)
    }
}

fn describe_conflicts(threads: &[HvkProcess], r: &Redexes) -> Vec<String> {
    r.conflicts
        .iter()
        .map(|&i| {
            let partners: Vec<String> = r
                .pairs
                .iter()
                .filter_map(|p| {
                    if p.left == i {
                        Some(p.right)
                    } else if p.right == i {
                        Some(p.left)
                    } else {
                        None
                    }
                })
                .map(|j| format!("`{}`", threads[j]))
                .collect();
            format!("`{}` can pair with {}", threads[i], partners.join(" or "))
        })
        .collect()
}

/// A single reduction from a normal form: the lowest-index conditional, else
/// the lowest-index redex. Calls exposed by the step are unfolded.
pub fn reduce_step(nf: &NormalForm, fresh: &mut Fresh) -> Result<(NormalForm, Vec<Rule>), HvkError> {
    let threads = &nf.threads;
    let mut out: Vec<Vec<HvkProcess>> = threads.iter().map(|t| vec![t.clone()]).collect();
    let mut names = nf.names.clone();
    let mut rules = Vec::new();
    if let Some((i, (rule, cont))) =
        threads.iter().enumerate().find_map(|(i, t)| fire_if(t).transpose().map(|r| r.map(|x| (i, x)))).transpose()?
    {
        out[i] = vec![cont];
        rules.push(rule);
    } else if let Some(r) = find_redexes(threads).pairs.first() {
        let (p, q) = fire(r, threads, fresh, &mut names, &mut SessionTable::default(), 0)?;
        out[r.left] = vec![p];
        out[r.right] = vec![q];
        rules.push(r.rule);
    } else {
        return Err(HvkError::Stuck);
    }
    let mut next = NormalForm { decls: nf.decls.clone(), names, threads: Vec::new() };
    for p in out.into_iter().flatten() {
        let n = next.absorb(p, fresh)?;
        rules.extend(std::iter::repeat_n(Rule::Def, n));
    }
    Ok((next, rules))
}

/// Per-round record: the state after the round and the rules it used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub threads: Vec<String>,
    pub fired_rules: Vec<String>,
}

/// Round 0 is the initial normal form; rounds `1..=rounds` follow.
pub fn outermost_run(p: &HvkProcess, rounds: usize, force_pairing: bool) -> Result<Vec<RoundRecord>, HvkError> {
    let (mut st, unfolded) = HvkState::new(p)?;
    st.force_pairing = force_pairing;
    let mut out = vec![record(&st, vec![Rule::Def; unfolded])];
    for _ in 0..rounds {
        let fired = st.round()?;
        out.push(record(&st, fired));
    }
    Ok(out)
}

fn record(st: &HvkState, fired: Vec<Rule>) -> RoundRecord {
    RoundRecord {
        round: st.round,
        threads: st.nf.threads.iter().map(|t| t.to_string()).collect(),
        fired_rules: fired.iter().map(Rule::to_string).collect(),
    }
}

pub fn records_to_jsonl(records: &[RoundRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("records always serialize") + "\n").collect()
}

/// Services with more than one accepting process.
pub fn lint_accept_uniqueness(p: &HvkProcess) -> Vec<String> {
    let mut count: BTreeMap<String, usize> = BTreeMap::new();
    p.visit(&mut |q| {
        if let HvkProcess::Accept { service, .. } | HvkProcess::DeclAccept { service, .. } = q {
            *count.entry(service.clone()).or_default() += 1;
        }
    });
    count
        .into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|(s, n)| format!("service `{s}` has {n} accepting processes; at most one is expected"))
        .collect()
}
