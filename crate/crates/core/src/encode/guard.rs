use std::collections::BTreeSet;

use crate::constraint::{Constraint, Substitution, Term};
use crate::utcc::derived::expand_once;
use crate::utcc::Process;

/// `p` restricted to units whose store entails `d`. Derived forms are
/// expanded first; binders that clash with `fv(d)` are renamed.
pub fn guard_process(d: &Constraint, p: &Process) -> Process {
    guard_process_latching(d, p, &|_| false)
}

/// Like [`guard_process`], but sub-processes selected by `latch` are only
/// guarded at their start: once `d` lets them in, they run unguarded.
pub fn guard_process_latching(d: &Constraint, p: &Process, latch: &dyn Fn(&Process) -> bool) -> Process {
    let fv = d.free_vars();
    Guard { d, fv: &fv, latch }.go(p)
}

struct Guard<'a> {
    d: &'a Constraint,
    fv: &'a BTreeSet<String>,
    latch: &'a dyn Fn(&Process) -> bool,
}

impl Guard<'_> {
    fn go(&self, p: &Process) -> Process {
        let (d, fv) = (self.d, self.fv);
        let guard = |_: &Constraint, _: &BTreeSet<String>, q: &Process| self.go(q);
        if (self.latch)(p) {
            return Process::when(d.clone(), p.clone());
        }
        match p {
            Process::Skip => Process::Skip,
            Process::Tell(_) => Process::when(d.clone(), p.clone()),
            Process::Par(ps) => Process::Par(ps.iter().map(|q| guard(d, fv, q)).collect()),
            Process::Bang(q) => Process::bang(guard(d, fv, q)),
            Process::BangN(n, q) => Process::bang_n(*n, guard(d, fv, q)),
            Process::Next(q) => Process::when(d.clone(), Process::next(guard(d, fv, q))),
            Process::Unless { guard: c, body } => {
                Process::when(d.clone(), Process::unless(c.clone(), guard(d, fv, body)))
            }
            Process::Abs { binders, guard: c, body, exclusions } => {
                let (bs, c, body) = avoid(binders, c, body, fv);
                let exclusions = exclusions
                    .iter()
                    .map(|e| {
                        Substitution::from_parts(&bs, &e.bindings.iter().map(|(_, t)| t.clone()).collect::<Vec<_>>())
                    })
                    .collect();
                Process::Abs { binders: bs, guard: c, body: Box::new(guard(d, fv, &body)), exclusions }
            }
            Process::Local { vars, init, body } => {
                let (vs, init, body) = avoid(vars, init, body, fv);
                Process::local(vs, init, guard(d, fv, &body))
            }
            Process::PTell(_) | Process::Wait { .. } | Process::WaitAck { .. } => guard(d, fv, &expand_once(p)),
        }
    }
}

/// Renames binders occurring in `fv` to primed names free of both.
fn avoid(
    binders: &[String],
    c: &Constraint,
    body: &Process,
    fv: &BTreeSet<String>,
) -> (Vec<String>, Constraint, Process) {
    if !binders.iter().any(|b| fv.contains(b)) {
        return (binders.to_vec(), c.clone(), body.clone());
    }
    let mut taken: BTreeSet<String> = fv.clone();
    taken.extend(c.free_vars());
    taken.extend(body.free_vars());
    taken.extend(binders.iter().cloned());
    let (mut c, mut body) = (c.clone(), body.clone());
    let mut out = Vec::new();
    for b in binders {
        if !fv.contains(b) {
            out.push(b.clone());
            continue;
        }
        let mut nb = format!("{b}'");
        while taken.contains(&nb) {
            nb.push('\'');
        }
        taken.insert(nb.clone());
        c = c.rename(b, &nb);
        body = body.subst(&Substitution::new(vec![(b.clone(), Term::var(nb.clone()))]));
        out.push(nb);
    }
    (out, c, body)
}
