//! Definitional expansion of persistent tell and acknowledged wait.

use std::collections::BTreeSet;

use crate::constraint::{Constraint, Term};

use super::process::Process;

/// Predicate used by the go/stop handshake machinery.
pub const OUT_PRIME: &str = "out'";

fn out_prime(v: &str) -> Constraint {
    Constraint::atom(OUT_PRIME, vec![Term::var(v)])
}

/// `base`, or `base$1`, `base$2`, ... avoiding `taken`.
fn pick(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{base}${i}")).find(|n| !taken.contains(n)).unwrap()
}

/// Expands the outermost derived form of `p`; other processes are returned
/// unchanged.
pub fn expand_once(p: &Process) -> Process {
    match p {
        Process::PTell(c) => {
            let taken = c.free_vars();
            let go = pick("go", &taken);
            let stop = pick("stop", &taken);
            Process::local(
                vec![go.clone(), stop.clone()],
                Constraint::True,
                Process::Par(vec![
                    Process::tell(out_prime(&go)),
                    Process::bang(Process::when(out_prime(&go), Process::tell(c.clone()))),
                    Process::bang(Process::unless(out_prime(&stop), Process::tell(out_prime(&go)))),
                    Process::bang(Process::when(c.ack(), Process::bang(Process::tell(out_prime(&stop))))),
                ]),
            )
        }
        Process::Wait { binders, guard, body } => wait(binders, guard, (**body).clone()),
        Process::WaitAck { binders, guard, body } => {
            wait(binders, guard, Process::par(vec![(**body).clone(), Process::tell(guard.ack())]))
        }
        other => other.clone(),
    }
}

fn wait(binders: &[String], guard: &Constraint, body: Process) -> Process {
    let mut taken = guard.free_vars();
    taken.extend(body.free_vars());
    taken.extend(binders.iter().cloned());
    let stop = pick("stop", &taken);
    taken.insert(stop.clone());
    let go = pick("go", &taken);
    Process::local(
        vec![stop.clone(), go.clone()],
        Constraint::True,
        Process::Par(vec![
            Process::tell(out_prime(&go)),
            Process::bang(Process::unless(out_prime(&stop), Process::tell(out_prime(&go)))),
            Process::bang(Process::abs(
                binders.to_vec(),
                Constraint::and(vec![guard.clone(), out_prime(&go)]),
                Process::par(vec![body, Process::bang(Process::tell(out_prime(&stop)))]),
            )),
        ]),
    )
}

/// Expands every derived form, leaving only core constructs.
pub fn expand_derived(p: &Process) -> Process {
    match p {
        Process::Skip | Process::Tell(_) => p.clone(),
        Process::PTell(_) | Process::Wait { .. } | Process::WaitAck { .. } => expand_derived(&expand_once(p)),
        Process::Abs { binders, guard, body, exclusions } => Process::Abs {
            binders: binders.clone(),
            guard: guard.clone(),
            body: Box::new(expand_derived(body)),
            exclusions: exclusions.clone(),
        },
        Process::Par(ps) => Process::Par(ps.iter().map(expand_derived).collect()),
        Process::Local { vars, init, body } => Process::local(vars.clone(), init.clone(), expand_derived(body)),
        Process::Next(q) => Process::next(expand_derived(q)),
        Process::Unless { guard, body } => Process::unless(guard.clone(), expand_derived(body)),
        Process::Bang(q) => Process::bang(expand_derived(q)),
        Process::BangN(n, q) => Process::bang_n(*n, expand_derived(q)),
    }
}

/// `P || next P || ... || next^(n-1) P`.
pub fn unfold_bang_n(n: u32, p: &Process) -> Process {
    let mut parts = Vec::new();
    let mut cur = p.clone();
    for _ in 0..n {
        parts.push(cur.clone());
        cur = Process::next(cur);
    }
    Process::par(parts)
}
