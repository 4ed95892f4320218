use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constraint::{Constraint, Term};

/// One process declaration `X(x⃗; k⃗) = P`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decl {
    pub name: String,
    pub params: Vec<String>,
    pub chans: Vec<String>,
    pub body: HvkProcess,
}

/// HVK processes plus the timed constructs (timed request, declarative
/// accept, kill).
///
/// Channels, services and labels are plain names. Expressions are terms whose
/// bound identifiers are variables; everything else in an expression is a
/// name constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HvkProcess {
    Inact,
    Request {
        service: String,
        chan: String,
        body: Box<HvkProcess>,
    },
    Accept {
        service: String,
        chan: String,
        body: Box<HvkProcess>,
    },
    Send {
        chan: String,
        exprs: Vec<Term>,
        body: Box<HvkProcess>,
    },
    Receive {
        chan: String,
        vars: Vec<String>,
        body: Box<HvkProcess>,
    },
    Select {
        chan: String,
        label: String,
        body: Box<HvkProcess>,
    },
    Branch {
        chan: String,
        branches: Vec<(String, HvkProcess)>,
    },
    Throw {
        chan: String,
        sent: String,
        body: Box<HvkProcess>,
    },
    Catch {
        chan: String,
        bound: String,
        body: Box<HvkProcess>,
    },
    If {
        cond: Term,
        then: Box<HvkProcess>,
        els: Box<HvkProcess>,
    },
    Par(Vec<HvkProcess>),
    New {
        names: Vec<String>,
        body: Box<HvkProcess>,
    },
    Def {
        decls: Vec<Decl>,
        body: Box<HvkProcess>,
    },
    Call {
        name: String,
        args: Vec<Term>,
        chans: Vec<String>,
    },
    TimedRequest {
        service: String,
        chan: String,
        duration: Term,
        body: Box<HvkProcess>,
    },
    /// `precond` may mention the variable `dur_<chan>`.
    DeclAccept {
        service: String,
        chan: String,
        precond: Constraint,
        body: Box<HvkProcess>,
    },
    Kill(String),
}

pub fn dur_var(chan: &str) -> String {
    format!("dur_{chan}")
}

/// Data and channel substitutions applied together. A data variable bound to
/// a name (constant or generated) also renames channel occurrences.
#[derive(Debug, Clone, Default)]
pub struct Subst {
    pub data: HashMap<String, Term>,
    pub chans: HashMap<String, String>,
}

impl Subst {
    pub fn is_empty(&self) -> bool {
        self.data.is_empty() && self.chans.is_empty()
    }

    fn chan(&self, c: &str) -> String {
        if let Some(n) = self.chans.get(c) {
            return n.clone();
        }
        match self.data.get(c) {
            Some(Term::Var(n)) => n.clone(),
            Some(Term::Const(crate::constraint::Value::Sym(n))) => n.clone(),
            _ => c.to_string(),
        }
    }

    fn term(&self, t: &Term) -> Term {
        t.subst(&|v| self.data.get(v).cloned().or_else(|| self.chans.get(v).map(|c| Term::var(c.clone()))))
    }

    fn without(&self, names: &[&str]) -> Subst {
        if !names.iter().any(|n| self.data.contains_key(*n) || self.chans.contains_key(*n)) {
            return self.clone();
        }
        let mut s = self.clone();
        for n in names {
            s.data.remove(*n);
            s.chans.remove(*n);
        }
        s
    }
}

fn bx(p: HvkProcess) -> Box<HvkProcess> {
    Box::new(p)
}

impl HvkProcess {
    pub fn par(parts: impl IntoIterator<Item = HvkProcess>) -> HvkProcess {
        let mut out = Vec::new();
        for p in parts {
            match p {
                HvkProcess::Inact => {}
                HvkProcess::Par(ps) => out.extend(ps),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => HvkProcess::Inact,
            1 => out.pop().unwrap(),
            _ => HvkProcess::Par(out),
        }
    }

    pub fn is_timed(&self) -> bool {
        let mut timed = false;
        self.visit(&mut |p| {
            timed |= matches!(p, HvkProcess::TimedRequest { .. } | HvkProcess::DeclAccept { .. } | HvkProcess::Kill(_))
        });
        timed
    }

    /// Pre-order traversal including declaration bodies.
    pub fn visit(&self, f: &mut dyn FnMut(&HvkProcess)) {
        f(self);
        use HvkProcess::*;
        match self {
            Inact | Call { .. } | Kill(_) => {}
            Request { body, .. }
            | Accept { body, .. }
            | Send { body, .. }
            | Receive { body, .. }
            | Select { body, .. }
            | Throw { body, .. }
            | Catch { body, .. }
            | New { body, .. }
            | TimedRequest { body, .. }
            | DeclAccept { body, .. } => body.visit(f),
            Branch { branches, .. } => branches.iter().for_each(|(_, p)| p.visit(f)),
            If { then, els, .. } => {
                then.visit(f);
                els.visit(f);
            }
            Par(ps) => ps.iter().for_each(|p| p.visit(f)),
            Def { decls, body } => {
                decls.iter().for_each(|d| d.body.visit(f));
                body.visit(f);
            }
        }
    }

    /// Channel the construct acts on, for prefixes.
    pub fn subject(&self) -> Option<&str> {
        use HvkProcess::*;
        match self {
            Send { chan, .. }
            | Receive { chan, .. }
            | Select { chan, .. }
            | Branch { chan, .. }
            | Throw { chan, .. }
            | Catch { chan, .. }
            | Kill(chan) => Some(chan),
            _ => None,
        }
    }

    /// Free names: channels, services and expression variables.
    pub fn free_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>) {
        use HvkProcess::*;
        let under = |body: &HvkProcess, bound: &[&str], out: &mut BTreeSet<String>| {
            for n in body.free_names() {
                if !bound.contains(&n.as_str()) {
                    out.insert(n);
                }
            }
        };
        match self {
            Inact => {}
            Request { service, chan, body } | Accept { service, chan, body } => {
                out.insert(service.clone());
                under(body, &[chan], out);
            }
            TimedRequest { service, chan, duration, body } => {
                out.insert(service.clone());
                duration.collect_vars(out);
                under(body, &[chan], out);
            }
            DeclAccept { service, chan, precond, body } => {
                out.insert(service.clone());
                let dur = dur_var(chan);
                out.extend(precond.free_vars().into_iter().filter(|v| *v != dur));
                under(body, &[chan], out);
            }
            Send { chan, exprs, body } => {
                out.insert(chan.clone());
                exprs.iter().for_each(|e| e.collect_vars(out));
                body.collect_free(out);
            }
            Receive { chan, vars, body } => {
                out.insert(chan.clone());
                let bound: Vec<&str> = vars.iter().map(String::as_str).collect();
                under(body, &bound, out);
            }
            Select { chan, body, .. } => {
                out.insert(chan.clone());
                body.collect_free(out);
            }
            Branch { chan, branches } => {
                out.insert(chan.clone());
                branches.iter().for_each(|(_, p)| p.collect_free(out));
            }
            Throw { chan, sent, body } => {
                out.insert(chan.clone());
                out.insert(sent.clone());
                body.collect_free(out);
            }
            Catch { chan, bound, body } => {
                out.insert(chan.clone());
                under(body, &[bound], out);
            }
            If { cond, then, els } => {
                cond.collect_vars(out);
                then.collect_free(out);
                els.collect_free(out);
            }
            Par(ps) => ps.iter().for_each(|p| p.collect_free(out)),
            New { names, body } => {
                let bound: Vec<&str> = names.iter().map(String::as_str).collect();
                under(body, &bound, out);
            }
            Def { decls, body } => {
                for d in decls {
                    let bound: Vec<&str> = d.params.iter().chain(&d.chans).map(String::as_str).collect();
                    under(&d.body, &bound, out);
                }
                body.collect_free(out);
            }
            Call { args, chans, .. } => {
                args.iter().for_each(|e| e.collect_vars(out));
                out.extend(chans.iter().cloned());
            }
            Kill(k) => {
                out.insert(k.clone());
            }
        }
    }

    /// Process variables called but not declared by an enclosing `def`.
    pub fn free_proc_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free_pv(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free_pv(&self, scope: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            HvkProcess::Call { name, .. } => {
                if !scope.contains(name) {
                    out.insert(name.clone());
                }
            }
            HvkProcess::Def { decls, body } => {
                let depth = scope.len();
                scope.extend(decls.iter().map(|d| d.name.clone()));
                decls.iter().for_each(|d| d.body.collect_free_pv(scope, out));
                body.collect_free_pv(scope, out);
                scope.truncate(depth);
            }
            other => other.children().into_iter().for_each(|c| c.collect_free_pv(scope, out)),
        }
    }

    /// Immediate subprocesses, declaration bodies excluded.
    pub fn children(&self) -> Vec<&HvkProcess> {
        use HvkProcess::*;
        match self {
            Inact | Call { .. } | Kill(_) => vec![],
            Request { body, .. }
            | Accept { body, .. }
            | Send { body, .. }
            | Receive { body, .. }
            | Select { body, .. }
            | Throw { body, .. }
            | Catch { body, .. }
            | New { body, .. }
            | Def { body, .. }
            | TimedRequest { body, .. }
            | DeclAccept { body, .. } => vec![body],
            Branch { branches, .. } => branches.iter().map(|(_, p)| p).collect(),
            If { then, els, .. } => vec![then, els],
            Par(ps) => ps.iter().collect(),
        }
    }

    /// Substitution that stops at shadowing binders. Substituted names are
    /// constants or generated names, so no binder can capture them.
    pub fn subst(&self, s: &Subst) -> HvkProcess {
        if s.is_empty() {
            return self.clone();
        }
        use HvkProcess::*;
        match self {
            Inact => Inact,
            Request { service, chan, body } => {
                Request { service: s.chan(service), chan: chan.clone(), body: bx(body.subst(&s.without(&[chan]))) }
            }
            Accept { service, chan, body } => {
                Accept { service: s.chan(service), chan: chan.clone(), body: bx(body.subst(&s.without(&[chan]))) }
            }
            TimedRequest { service, chan, duration, body } => TimedRequest {
                service: s.chan(service),
                chan: chan.clone(),
                duration: s.term(duration),
                body: bx(body.subst(&s.without(&[chan]))),
            },
            DeclAccept { service, chan, precond, body } => {
                let dur = dur_var(chan);
                let inner = s.without(&[dur.as_str()]);
                DeclAccept {
                    service: s.chan(service),
                    chan: chan.clone(),
                    precond: precond.subst(&|v| inner.data.get(v).cloned()),
                    body: bx(body.subst(&s.without(&[chan]))),
                }
            }
            Send { chan, exprs, body } => {
                Send { chan: s.chan(chan), exprs: exprs.iter().map(|e| s.term(e)).collect(), body: bx(body.subst(s)) }
            }
            Receive { chan, vars, body } => {
                let bound: Vec<&str> = vars.iter().map(String::as_str).collect();
                Receive { chan: s.chan(chan), vars: vars.clone(), body: bx(body.subst(&s.without(&bound))) }
            }
            Select { chan, label, body } => {
                Select { chan: s.chan(chan), label: label.clone(), body: bx(body.subst(s)) }
            }
            Branch { chan, branches } => {
                Branch { chan: s.chan(chan), branches: branches.iter().map(|(l, p)| (l.clone(), p.subst(s))).collect() }
            }
            Throw { chan, sent, body } => Throw { chan: s.chan(chan), sent: s.chan(sent), body: bx(body.subst(s)) },
            Catch { chan, bound, body } => {
                Catch { chan: s.chan(chan), bound: bound.clone(), body: bx(body.subst(&s.without(&[bound]))) }
            }
            If { cond, then, els } => If { cond: s.term(cond), then: bx(then.subst(s)), els: bx(els.subst(s)) },
            Par(ps) => Par(ps.iter().map(|p| p.subst(s)).collect()),
            New { names, body } => {
                let bound: Vec<&str> = names.iter().map(String::as_str).collect();
                New { names: names.clone(), body: bx(body.subst(&s.without(&bound))) }
            }
            Def { decls, body } => Def {
                decls: decls
                    .iter()
                    .map(|d| {
                        let bound: Vec<&str> = d.params.iter().chain(&d.chans).map(String::as_str).collect();
                        Decl { body: d.body.subst(&s.without(&bound)), ..d.clone() }
                    })
                    .collect(),
                body: bx(body.subst(s)),
            },
            Call { name, args, chans } => Call {
                name: name.clone(),
                args: args.iter().map(|e| s.term(e)).collect(),
                chans: chans.iter().map(|c| s.chan(c)).collect(),
            },
            Kill(k) => Kill(s.chan(k)),
        }
    }

    pub fn rename(&self, from: &str, to: &str) -> HvkProcess {
        let mut s = Subst::default();
        s.chans.insert(from.to_string(), to.to_string());
        self.subst(&s)
    }

    /// Number of AST nodes, declaration bodies included.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }
}

fn list(items: &[String]) -> String {
    items.join(", ")
}

fn terms(items: &[Term]) -> String {
    items.iter().map(Term::to_string).collect::<Vec<_>>().join(", ")
}

/// Prints a continuation, parenthesized when it is not a prefix form.
struct Tight<'a>(&'a HvkProcess);

impl fmt::Display for Tight<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            HvkProcess::Par(_) | HvkProcess::Def { .. } => write!(f, "({})", self.0),
            p => write!(f, "{p}"),
        }
    }
}

impl fmt::Display for Decl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}; {}) = {}", self.name, list(&self.params), list(&self.chans), Tight(&self.body))
    }
}

impl fmt::Display for HvkProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use HvkProcess::*;
        match self {
            Inact => f.write_str("0"),
            Request { service, chan, body } => write!(f, "request {service}({chan}) in {}", Tight(body)),
            Accept { service, chan, body } => write!(f, "accept {service}({chan}) in {}", Tight(body)),
            TimedRequest { service, chan, duration, body } => {
                write!(f, "request {service}({chan}, {duration}) in {}", Tight(body))
            }
            DeclAccept { service, chan, precond, body } => {
                write!(f, "accept {service}({chan} : {precond}) in {}", Tight(body))
            }
            Send { chan, exprs, body } => write!(f, "{chan}![{}] {}", terms(exprs), Tight(body)),
            Receive { chan, vars, body } => write!(f, "{chan}?({}) in {}", list(vars), Tight(body)),
            Select { chan, label, body } => write!(f, "{chan} <| {label}; {}", Tight(body)),
            Branch { chan, branches } => {
                write!(f, "{chan} |> {{ ")?;
                for (i, (l, p)) in branches.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" || ")?;
                    }
                    write!(f, "{l}: {}", Tight(p))?;
                }
                f.write_str(" }")
            }
            Throw { chan, sent, body } => write!(f, "throw {chan}![{sent}] {}", Tight(body)),
            Catch { chan, bound, body } => write!(f, "catch {chan}?(({bound})) in {}", Tight(body)),
            If { cond, then, els } => {
                write!(f, "if {cond} then {} else {}", Tight(then), Tight(els))
            }
            Par(ps) => {
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    write!(f, "{}", Tight(p))?;
                }
                Ok(())
            }
            New { names, body } => write!(f, "new {} in {}", list(names), Tight(body)),
            Def { decls, body } => {
                f.write_str("def ")?;
                for (i, d) in decls.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" and ")?;
                    }
                    write!(f, "{d}")?;
                }
                write!(f, " in {body}")
            }
            Call { name, args, chans } => write!(f, "{name}[{}; {}]", terms(args), list(chans)),
            Kill(k) => write!(f, "kill({k})"),
        }
    }
}
