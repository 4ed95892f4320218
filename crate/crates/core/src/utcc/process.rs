use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constraint::{Constraint, Substitution, Term};

/// utcc process terms. `PTell`, `Wait` and `WaitAck` are derived forms that
/// the engine expands on first execution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Process {
    Skip,
    Tell(Constraint),
    Abs {
        binders: Vec<String>,
        guard: Constraint,
        body: Box<Process>,
        exclusions: Vec<Substitution>,
    },
    Par(Vec<Process>),
    Local {
        vars: Vec<String>,
        init: Constraint,
        body: Box<Process>,
    },
    Next(Box<Process>),
    Unless {
        guard: Constraint,
        body: Box<Process>,
    },
    Bang(Box<Process>),
    /// `P || next P || ... || next^(n-1) P`.
    BangN(u32, Box<Process>),
    PTell(Constraint),
    Wait {
        binders: Vec<String>,
        guard: Constraint,
        body: Box<Process>,
    },
    WaitAck {
        binders: Vec<String>,
        guard: Constraint,
        body: Box<Process>,
    },
}

impl Process {
    pub fn tell(c: Constraint) -> Process {
        Process::Tell(c)
    }

    pub fn abs(binders: Vec<String>, guard: Constraint, body: Process) -> Process {
        Process::Abs { binders, guard, body: Box::new(body), exclusions: Vec::new() }
    }

    /// `when c do P`, an abstraction without binders.
    pub fn when(guard: Constraint, body: Process) -> Process {
        Process::abs(Vec::new(), guard, body)
    }

    pub fn local(vars: Vec<String>, init: Constraint, body: Process) -> Process {
        Process::Local { vars, init, body: Box::new(body) }
    }

    pub fn next(p: Process) -> Process {
        Process::Next(Box::new(p))
    }

    pub fn unless(guard: Constraint, body: Process) -> Process {
        Process::Unless { guard, body: Box::new(body) }
    }

    pub fn bang(p: Process) -> Process {
        Process::Bang(Box::new(p))
    }

    pub fn bang_n(n: u32, p: Process) -> Process {
        Process::BangN(n, Box::new(p))
    }

    pub fn wait(binders: Vec<String>, guard: Constraint, body: Process) -> Process {
        Process::Wait { binders, guard, body: Box::new(body) }
    }

    pub fn wait_ack(binders: Vec<String>, guard: Constraint, body: Process) -> Process {
        Process::WaitAck { binders, guard, body: Box::new(body) }
    }

    pub fn whenever(guard: Constraint, body: Process) -> Process {
        Process::wait_ack(Vec::new(), guard, body)
    }

    /// Flattening parallel composition; `Skip` components vanish.
    pub fn par(parts: impl IntoIterator<Item = Process>) -> Process {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Process::Skip => {}
                Process::Par(ps) => out.extend(ps),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Process::Skip,
            1 => out.pop().unwrap(),
            _ => Process::Par(out),
        }
    }

    pub fn is_derived(&self) -> bool {
        matches!(self, Process::PTell(_) | Process::Wait { .. } | Process::WaitAck { .. })
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>) {
        type Part<'a> = &'a dyn Fn(&mut BTreeSet<String>);
        let bound = |bs: &[String], parts: &[Part], out: &mut BTreeSet<String>| {
            let mut inner = BTreeSet::new();
            for p in parts {
                p(&mut inner);
            }
            out.extend(inner.into_iter().filter(|v| !bs.contains(v)));
        };
        match self {
            Process::Skip => {}
            Process::Tell(c) | Process::PTell(c) => out.extend(c.free_vars()),
            Process::Abs { binders, guard, body, exclusions } => {
                bound(binders, &[&|s| s.extend(guard.free_vars()), &|s| body.collect_free(s)], out);
                for e in exclusions {
                    for (_, t) in &e.bindings {
                        out.extend(t.vars());
                    }
                }
            }
            Process::Wait { binders, guard, body } | Process::WaitAck { binders, guard, body } => {
                bound(binders, &[&|s| s.extend(guard.free_vars()), &|s| body.collect_free(s)], out)
            }
            Process::Local { vars, init, body } => {
                bound(vars, &[&|s| s.extend(init.free_vars()), &|s| body.collect_free(s)], out)
            }
            Process::Par(ps) => ps.iter().for_each(|p| p.collect_free(out)),
            Process::Next(p) | Process::Bang(p) | Process::BangN(_, p) => p.collect_free(out),
            Process::Unless { guard, body } => {
                out.extend(guard.free_vars());
                body.collect_free(out);
            }
        }
    }

    /// Capture-avoiding substitution of free variables.
    pub fn subst(&self, sigma: &Substitution) -> Process {
        if sigma.is_empty() {
            return self.clone();
        }
        let f = sigma.lookup_fn();
        match self {
            Process::Skip => Process::Skip,
            Process::Tell(c) => Process::Tell(c.subst(&f)),
            Process::PTell(c) => Process::PTell(c.subst(&f)),
            Process::Par(ps) => Process::Par(ps.iter().map(|p| p.subst(sigma)).collect()),
            Process::Next(p) => Process::next(p.subst(sigma)),
            Process::Bang(p) => Process::bang(p.subst(sigma)),
            Process::BangN(n, p) => Process::bang_n(*n, p.subst(sigma)),
            Process::Unless { guard, body } => Process::unless(guard.subst(&f), body.subst(sigma)),
            Process::Abs { binders, guard, body, exclusions } => {
                let (bs, guard, body, inner) = under_binders(binders, guard, body, sigma);
                let exclusions = exclusions
                    .iter()
                    .map(|e| {
                        Substitution::new(
                            e.bindings
                                .iter()
                                .zip(&bs)
                                .map(|((_, t), b)| (b.clone(), t.subst(&inner.lookup_fn())))
                                .collect(),
                        )
                    })
                    .collect();
                Process::Abs { binders: bs, guard, body: Box::new(body), exclusions }
            }
            Process::Wait { binders, guard, body } => {
                let (bs, guard, body, _) = under_binders(binders, guard, body, sigma);
                Process::wait(bs, guard, body)
            }
            Process::WaitAck { binders, guard, body } => {
                let (bs, guard, body, _) = under_binders(binders, guard, body, sigma);
                Process::wait_ack(bs, guard, body)
            }
            Process::Local { vars, init, body } => {
                let (vs, init, body, _) = under_binders(vars, init, body, sigma);
                Process::local(vs, init, body)
            }
        }
    }

    /// Renames a single free variable.
    pub fn rename(&self, from: &str, to: &str) -> Process {
        self.subst(&Substitution::new(vec![(from.to_string(), Term::var(to))]))
    }
}

/// Pushes `sigma` under `binders`, renaming binders that would capture a
/// variable of the substituted terms. Returns the (possibly renamed) binders,
/// the substituted guard and body, and the substitution actually used inside.
fn under_binders(
    binders: &[String],
    guard: &Constraint,
    body: &Process,
    sigma: &Substitution,
) -> (Vec<String>, Constraint, Process, Substitution) {
    let inner: Vec<(String, Term)> = sigma.bindings.iter().filter(|(v, _)| !binders.contains(v)).cloned().collect();
    let range: BTreeSet<String> = inner.iter().flat_map(|(_, t)| t.vars()).collect();
    let mut bs = Vec::new();
    let mut renames = Vec::new();
    let mut taken: BTreeSet<String> = range.clone();
    taken.extend(guard.free_vars());
    taken.extend(body.free_vars());
    taken.extend(binders.iter().cloned());
    for b in binders {
        if range.contains(b) {
            let mut n = format!("{b}'");
            while taken.contains(&n) {
                n.push('\'');
            }
            taken.insert(n.clone());
            renames.push((b.clone(), Term::var(n.clone())));
            bs.push(n);
        } else {
            bs.push(b.clone());
        }
    }
    let mut all = renames;
    all.extend(inner);
    let inner = Substitution::new(all);
    let (g, p) = if inner.is_empty() {
        (guard.clone(), body.clone())
    } else {
        (guard.subst(&inner.lookup_fn()), body.subst(&inner))
    };
    (bs, g, p, inner)
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::Par(ps) if ps.is_empty() => f.write_str("skip"),
            Process::Par(ps) => {
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" || ")?;
                    }
                    write!(f, "{}", Unary(p))?;
                }
                Ok(())
            }
            p => write!(f, "{}", Unary(p)),
        }
    }
}

/// Prints a process in a position that binds tighter than `||`.
struct Unary<'a>(&'a Process);

impl fmt::Display for Unary<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Process::Skip => f.write_str("skip"),
            Process::Tell(c) => write!(f, "tell({c})"),
            Process::PTell(c) => write!(f, "ptell({c})"),
            Process::Par(ps) if ps.is_empty() => f.write_str("skip"),
            Process::Par(_) => write!(f, "({})", self.0),
            Process::Abs { binders, guard, body, exclusions } if binders.is_empty() && exclusions.is_empty() => {
                write!(f, "when {guard} do {}", Unary(body))
            }
            Process::Abs { binders, guard, body, exclusions } => {
                write!(f, "(abs {}; {guard}", binders.join(", "))?;
                if !exclusions.is_empty() {
                    f.write_str(" excluding")?;
                    for e in exclusions {
                        write!(f, " {e}")?;
                    }
                }
                write!(f, ") {}", Unary(body))
            }
            Process::Local { vars, init: Constraint::True, body } => {
                write!(f, "(local {}) {}", vars.join(", "), Unary(body))
            }
            Process::Local { vars, init, body } => {
                write!(f, "(local {}; {init}) {}", vars.join(", "), Unary(body))
            }
            Process::Next(p) => write!(f, "next {}", Unary(p)),
            Process::Unless { guard, body } => write!(f, "unless {guard} next {}", Unary(body)),
            Process::Bang(p) => write!(f, "!{}", Unary(p)),
            Process::BangN(n, p) => write!(f, "![{n}] {}", Unary(p)),
            Process::Wait { binders, guard, body } => {
                write!(f, "wait {}; {guard} do {}", binders.join(", "), Unary(body))
            }
            Process::WaitAck { binders, guard, body } if binders.is_empty() => {
                write!(f, "whenever {guard} do {}", Unary(body))
            }
            Process::WaitAck { binders, guard, body } => {
                write!(f, "waitack {}; {guard} do {}", binders.join(", "), Unary(body))
            }
        }
    }
}
