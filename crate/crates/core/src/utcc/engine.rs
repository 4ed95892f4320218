use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::constraint::{first_match, is_generated, Constraint, Fresh, Store, Substitution, Term};
use crate::error::EngineError;

use super::derived::{expand_derived, expand_once, unfold_bang_n};
use super::process::Process;
use super::trace::{Trace, UnitOutput};

pub const DEFAULT_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineOptions {
    /// Internal transitions allowed per time unit.
    pub budget: usize,
    /// Expand derived forms before the first unit instead of on demand.
    pub eager_expand: bool,
    /// Keep each unit's residual process in the trace.
    pub keep_residuals: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { budget: DEFAULT_BUDGET, eager_expand: false, keep_residuals: false }
    }
}

/// A process, split into parallel threads, together with its store.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub threads: Vec<Process>,
    pub store: Store,
    /// Store version at which each thread was last found blocked.
    blocked_at: Vec<Option<u64>>,
    last_fired: Option<String>,
}

impl Configuration {
    pub fn new(p: Process, store: Store) -> Self {
        let mut cfg = Configuration { threads: Vec::new(), store, blocked_at: Vec::new(), last_fired: None };
        cfg.splice(0, 0, p);
        cfg
    }

    pub fn process(&self) -> Process {
        Process::par(self.threads.iter().cloned())
    }

    /// Replaces `remove` threads at `at` with the components of `p`.
    fn splice(&mut self, at: usize, remove: usize, p: Process) {
        let mut parts = Vec::new();
        flatten(p, &mut parts);
        let n = parts.len();
        self.threads.splice(at..at + remove, parts);
        self.blocked_at.splice(at..at + remove, std::iter::repeat_n(None, n));
    }

    /// Applies one internal transition to the leftmost enabled thread.
    /// Returns `false` when the configuration is quiescent.
    pub fn step_internal(&mut self) -> Result<bool, EngineError> {
        let version = self.store.version();
        for i in 0..self.threads.len() {
            if self.blocked_at[i] == Some(version) {
                continue;
            }
            if self.try_fire(i)? {
                return Ok(true);
            }
            self.blocked_at[i] = Some(version);
        }
        Ok(false)
    }

    fn try_fire(&mut self, i: usize) -> Result<bool, EngineError> {
        let thread = &self.threads[i];
        let replacement = match thread {
            Process::Skip => Process::Skip,
            Process::Par(_) => thread.clone(),
            Process::Tell(c) => {
                let c = c.clone();
                self.store.tell(&c)?;
                Process::Skip
            }
            Process::Local { vars, init, body } => {
                let mut renames = Vec::new();
                for v in vars {
                    let fresh = self.store.fresh_mut().var(v);
                    self.store.add_hidden(fresh.clone());
                    renames.push((v.clone(), Term::var(fresh)));
                }
                let sigma = Substitution::new(renames);
                let init = init.subst_map(&sigma);
                let body = body.subst(&sigma);
                self.store.tell(&init)?;
                body
            }
            Process::Abs { binders, guard, body, exclusions } => {
                let Some(sigma) = first_match(&self.store, binders, guard, exclusions) else {
                    return Ok(false);
                };
                let fired = body.subst(&sigma);
                let mut exclusions = exclusions.clone();
                exclusions.push(sigma);
                let rest =
                    Process::Abs { binders: binders.clone(), guard: guard.clone(), body: body.clone(), exclusions };
                Process::Par(vec![fired, rest])
            }
            Process::Unless { guard, .. } => {
                if !self.store.entails(guard) {
                    return Ok(false);
                }
                Process::Skip
            }
            Process::Next(_) => return Ok(false),
            Process::Bang(p) => Process::Par(vec![(**p).clone(), Process::next(thread.clone())]),
            Process::BangN(n, p) => unfold_bang_n(*n, p),
            Process::PTell(_) | Process::Wait { .. } | Process::WaitAck { .. } => expand_once(thread),
        };
        self.last_fired = Some(summary(thread));
        self.splice(i, 1, replacement);
        Ok(true)
    }

    /// Runs internal transitions to a fixed point. Returns the step count.
    pub fn quiesce(&mut self, budget: usize) -> Result<usize, EngineError> {
        if budget == 0 {
            return Err(EngineError::ZeroBudget);
        }
        let mut steps = 0;
        while self.step_internal()? {
            steps += 1;
            if steps > budget {
                return Err(EngineError::NonQuiescent { budget, culprit: self.last_fired.clone().unwrap_or_default() });
            }
        }
        Ok(steps)
    }
}

fn flatten(p: Process, out: &mut Vec<Process>) {
    match p {
        Process::Skip => {}
        Process::Par(ps) => ps.into_iter().for_each(|q| flatten(q, out)),
        p => out.push(p),
    }
}

fn summary(p: &Process) -> String {
    let s = p.to_string();
    if s.chars().count() > 160 {
        let cut: String = s.chars().take(160).collect();
        format!("{cut}...")
    } else {
        s
    }
}

/// The process to run at the next time unit.
pub fn future(p: &Process) -> Process {
    match p {
        Process::Skip | Process::Abs { .. } => Process::Skip,
        Process::Par(ps) => Process::par(ps.iter().map(future)),
        Process::Local { vars, body, .. } => Process::local(vars.clone(), Constraint::True, future(body)),
        Process::Next(q) | Process::Unless { body: q, .. } => (**q).clone(),
        other => other.clone(),
    }
}

/// Structural-congruence normal form: flattened parallel composition without
/// `skip`, local scopes hoisted and merged, parallel components sorted.
pub fn congr_normalize(p: &Process) -> Process {
    match p {
        Process::Par(ps) => {
            let mut parts = Vec::new();
            for q in ps {
                flatten(congr_normalize(q), &mut parts);
            }
            hoist_locals(parts)
        }
        Process::Local { vars, init, body } => {
            let body = congr_normalize(body);
            let mut vars = vars.clone();
            let mut init = init.clone();
            let mut body = body;
            while let Process::Local { vars: inner, init: d, body: q } = &body {
                let disjoint = inner.iter().all(|y| !vars.contains(y) && !init.free_vars().contains(y));
                if !disjoint {
                    break;
                }
                vars.extend(inner.iter().cloned());
                init = Constraint::and(vec![init, d.clone()]);
                let q = (**q).clone();
                body = q;
            }
            Process::local(vars, init, body)
        }
        Process::Abs { binders, guard, body, exclusions } => Process::Abs {
            binders: binders.clone(),
            guard: guard.clone(),
            body: Box::new(congr_normalize(body)),
            exclusions: exclusions.clone(),
        },
        Process::Next(q) => Process::next(congr_normalize(q)),
        Process::Unless { guard, body } => Process::unless(guard.clone(), congr_normalize(body)),
        Process::Bang(q) => Process::bang(congr_normalize(q)),
        Process::BangN(n, q) => Process::bang_n(*n, congr_normalize(q)),
        Process::Wait { binders, guard, body } => Process::wait(binders.clone(), guard.clone(), congr_normalize(body)),
        Process::WaitAck { binders, guard, body } => {
            Process::wait_ack(binders.clone(), guard.clone(), congr_normalize(body))
        }
        other => other.clone(),
    }
}

/// `P || (local x; c) Q == (local x; c) (P || Q)` when `x` is not free in `P`.
fn hoist_locals(parts: Vec<Process>) -> Process {
    let mut vars: Vec<String> = Vec::new();
    let mut inits = Vec::new();
    let mut rest = Vec::new();
    let fvs: Vec<BTreeSet<String>> = parts.iter().map(Process::free_vars).collect();
    for (i, p) in parts.iter().enumerate() {
        if let Process::Local { vars: xs, init, body } = p {
            let clash =
                xs.iter().any(|x| vars.contains(x) || fvs.iter().enumerate().any(|(j, fv)| j != i && fv.contains(x)));
            if !clash {
                vars.extend(xs.iter().cloned());
                inits.push(init.clone());
                flatten((**body).clone(), &mut rest);
                continue;
            }
        }
        rest.push(p.clone());
    }
    rest.sort_by_cached_key(|p| p.to_string());
    let inner = if rest.len() == 1 {
        rest.pop().unwrap()
    } else if rest.is_empty() {
        Process::Skip
    } else {
        Process::Par(rest)
    };
    if vars.is_empty() {
        inner
    } else {
        congr_normalize(&Process::local(vars, Constraint::and(inits), inner))
    }
}

/// One observable time unit.
#[derive(Debug, Clone)]
pub struct TimeUnitResult {
    pub residual: Process,
    /// Quiescent store with hidden variables projected away.
    pub output: Constraint,
    pub unit: UnitOutput,
    pub internal_steps: usize,
    pub store: Store,
}

/// Stateful driver; carries the fresh-name supply across time units so
/// hidden variables from different units never collide.
#[derive(Debug, Clone, Default)]
pub struct Engine {
    pub options: EngineOptions,
    fresh: Fresh,
}

impl Engine {
    pub fn new(options: EngineOptions) -> Self {
        Engine { options, fresh: Fresh::new() }
    }

    pub fn with_budget(budget: usize) -> Self {
        Engine::new(EngineOptions { budget, ..EngineOptions::default() })
    }

    pub fn observe(&mut self, p: &Process, input: &Constraint) -> Result<TimeUnitResult, EngineError> {
        let mut store = Store::with_fresh(self.fresh.clone());
        store.tell(input)?;
        let mut cfg = Configuration::new(p.clone(), store);
        let steps = cfg.quiesce(self.options.budget);
        self.fresh = cfg.store.fresh().clone();
        let steps = steps?;
        let residual = future(&cfg.process());
        let hidden = hidden_vars(&cfg.store);
        let output = cfg.store.hide(&hidden);
        let unit = UnitOutput::from_store(&cfg.store);
        Ok(TimeUnitResult { residual, output, unit, internal_steps: steps, store: cfg.store })
    }

    /// Runs `units` time units; missing inputs default to `true`.
    pub fn run(&mut self, p: &Process, units: usize, inputs: &[Constraint]) -> Result<Trace, EngineError> {
        if units == 0 {
            return Err(EngineError::ZeroUnits);
        }
        let mut cur = if self.options.eager_expand { expand_derived(p) } else { p.clone() };
        let mut trace = Trace::default();
        for i in 0..units {
            let input = inputs.get(i).cloned().unwrap_or(Constraint::True);
            let r = self.observe(&cur, &input)?;
            trace.outputs.push(r.unit);
            if self.options.keep_residuals {
                trace.residuals.push(r.residual.clone());
            }
            cur = r.residual;
        }
        Ok(trace)
    }
}

/// Every generated name occurring in the store, plus declared hidden names.
pub fn hidden_vars(store: &Store) -> Vec<String> {
    let mut out: Vec<String> = store.hidden().to_vec();
    for v in store.content().free_vars() {
        if is_generated(&v) && !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Runs `p` for `units` units with the default options.
pub fn run(p: &Process, units: usize, inputs: &[Constraint]) -> Result<Trace, EngineError> {
    Engine::default().run(p, units, inputs)
}

pub fn observe(p: &Process, input: &Constraint, budget: usize) -> Result<TimeUnitResult, EngineError> {
    Engine::with_budget(budget).observe(p, input)
}
