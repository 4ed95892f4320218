use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::term::Term;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { pred: pred.into(), args }
    }

    pub fn subst(&self, f: &dyn Fn(&str) -> Option<Term>) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.iter().map(|t| t.subst(f)).collect() }
    }

    pub fn normalize(&self) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.iter().map(Term::normalize).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            return f.write_str(&self.pred);
        }
        write!(f, "{}(", self.pred)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Acknowledgment predicate for `pred`: same arity, distinct name.
pub fn ack_pred(pred: &str) -> String {
    format!("ack_{pred}")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Constraint {
    True,
    False,
    Atom(Atom),
    Eq(Term, Term),
    Neq(Term, Term),
    /// Built-in test: entailed when the term evaluates to `true`.
    Holds(Term),
    And(Vec<Constraint>),
    Exists(Vec<String>, Box<Constraint>),
}

impl Constraint {
    pub fn atom(pred: impl Into<String>, args: Vec<Term>) -> Constraint {
        Constraint::Atom(Atom::new(pred, args))
    }

    /// Flattening conjunction; drops `True`, collapses on `False`.
    pub fn and(parts: impl IntoIterator<Item = Constraint>) -> Constraint {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Constraint::True => {}
                Constraint::And(inner) => {
                    for q in inner {
                        match q {
                            Constraint::True => {}
                            q => out.push(q),
                        }
                    }
                }
                p => out.push(p),
            }
        }
        if out.contains(&Constraint::False) {
            return Constraint::False;
        }
        match out.len() {
            0 => Constraint::True,
            1 => out.pop().unwrap(),
            _ => Constraint::And(out),
        }
    }

    /// Existential over the binders that actually occur free in `body`.
    pub fn exists(vars: Vec<String>, body: Constraint) -> Constraint {
        let fv = body.free_vars();
        let mut seen = BTreeSet::new();
        let vars: Vec<String> = vars.into_iter().filter(|v| fv.contains(v) && seen.insert(v.clone())).collect();
        if vars.is_empty() || matches!(body, Constraint::True | Constraint::False) {
            body
        } else {
            Constraint::Exists(vars, Box::new(body))
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>) {
        match self {
            Constraint::True | Constraint::False => {}
            Constraint::Atom(a) => a.args.iter().for_each(|t| t.collect_vars(out)),
            Constraint::Eq(a, b) | Constraint::Neq(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Constraint::Holds(t) => t.collect_vars(out),
            Constraint::And(cs) => cs.iter().for_each(|c| c.collect_free(out)),
            Constraint::Exists(bs, body) => {
                let mut inner = BTreeSet::new();
                body.collect_free(&mut inner);
                for v in inner {
                    if !bs.contains(&v) {
                        out.insert(v);
                    }
                }
            }
        }
    }

    /// Every constant occurring anywhere in the constraint.
    pub fn constants(&self) -> Vec<Term> {
        let mut terms = Vec::new();
        self.visit_terms(&mut |t| {
            let mut subs = Vec::new();
            t.subterms(&mut subs);
            for s in subs {
                if matches!(s, Term::Const(_)) && !terms.contains(s) {
                    terms.push(s.clone());
                }
            }
        });
        terms
    }

    pub fn visit_terms(&self, f: &mut dyn FnMut(&Term)) {
        match self {
            Constraint::True | Constraint::False => {}
            Constraint::Atom(a) => a.args.iter().for_each(&mut *f),
            Constraint::Eq(a, b) | Constraint::Neq(a, b) => {
                f(a);
                f(b);
            }
            Constraint::Holds(t) => f(t),
            Constraint::And(cs) => cs.iter().for_each(|c| c.visit_terms(f)),
            Constraint::Exists(_, body) => body.visit_terms(f),
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Constraint::Atom(a) => out.push(a),
            Constraint::And(cs) => cs.iter().for_each(|c| c.collect_atoms(out)),
            Constraint::Exists(_, body) => body.collect_atoms(out),
            _ => {}
        }
    }

    /// Capture-avoiding substitution of free variables.
    pub fn subst(&self, f: &dyn Fn(&str) -> Option<Term>) -> Constraint {
        match self {
            Constraint::True | Constraint::False => self.clone(),
            Constraint::Atom(a) => Constraint::Atom(a.subst(f)),
            Constraint::Eq(a, b) => Constraint::Eq(a.subst(f), b.subst(f)),
            Constraint::Neq(a, b) => Constraint::Neq(a.subst(f), b.subst(f)),
            Constraint::Holds(t) => Constraint::Holds(t.subst(f)),
            Constraint::And(cs) => Constraint::And(cs.iter().map(|c| c.subst(f)).collect()),
            Constraint::Exists(bs, body) => {
                // Replacement terms for the body's free variables.
                let mut incoming = BTreeSet::new();
                for v in body.free_vars() {
                    if bs.contains(&v) {
                        continue;
                    }
                    if let Some(t) = f(&v) {
                        t.collect_vars(&mut incoming);
                    }
                }
                let mut renamed = Vec::new();
                let mut new_bs = Vec::new();
                for b in bs {
                    if incoming.contains(b) {
                        let mut n = 1;
                        let fresh = loop {
                            let cand = format!("{b}'{n}");
                            if !incoming.contains(&cand) && !bs.contains(&cand) {
                                break cand;
                            }
                            n += 1;
                        };
                        renamed.push((b.clone(), fresh.clone()));
                        new_bs.push(fresh);
                    } else {
                        new_bs.push(b.clone());
                    }
                }
                let inner = |v: &str| -> Option<Term> {
                    if let Some((_, to)) = renamed.iter().find(|(from, _)| from == v) {
                        return Some(Term::var(to.clone()));
                    }
                    if bs.iter().any(|b| b == v) {
                        return None;
                    }
                    f(v)
                };
                Constraint::Exists(new_bs, Box::new(body.subst(&inner)))
            }
        }
    }

    pub fn subst_map(&self, sigma: &Substitution) -> Constraint {
        self.subst(&|v| sigma.get(v).cloned())
    }

    pub fn rename(&self, from: &str, to: &str) -> Constraint {
        self.subst(&|v| (v == from).then(|| Term::var(to)))
    }

    pub fn normalize(&self) -> Constraint {
        match self {
            Constraint::True | Constraint::False => self.clone(),
            Constraint::Atom(a) => Constraint::Atom(a.normalize()),
            Constraint::Eq(a, b) => Constraint::Eq(a.normalize(), b.normalize()),
            Constraint::Neq(a, b) => Constraint::Neq(a.normalize(), b.normalize()),
            Constraint::Holds(t) => match t.normalize() {
                Term::Const(crate::constraint::Value::Bool(true)) => Constraint::True,
                Term::Const(crate::constraint::Value::Bool(false)) => Constraint::False,
                t => Constraint::Holds(t),
            },
            Constraint::And(cs) => Constraint::and(cs.iter().map(Constraint::normalize)),
            Constraint::Exists(bs, body) => Constraint::Exists(bs.clone(), Box::new(body.normalize())),
        }
    }

    /// The acknowledgment co-constraint: every atom `p(t)` becomes `ack_p(t)`;
    /// non-atomic literals carry no acknowledgment.
    pub fn ack(&self) -> Constraint {
        match self {
            Constraint::Atom(a) => Constraint::Atom(Atom::new(ack_pred(&a.pred), a.args.clone())),
            Constraint::And(cs) => Constraint::and(cs.iter().map(Constraint::ack)),
            Constraint::Exists(bs, body) => Constraint::exists(bs.clone(), body.ack()),
            Constraint::False => Constraint::False,
            _ => Constraint::True,
        }
    }

    /// Keeps only atoms whose predicate satisfies `keep`; other literals are
    /// preserved, unused binders dropped.
    pub fn filter_atoms(&self, keep: &dyn Fn(&str) -> bool) -> Constraint {
        match self {
            Constraint::Atom(a) if !keep(&a.pred) => Constraint::True,
            Constraint::And(cs) => Constraint::and(cs.iter().map(|c| c.filter_atoms(keep))),
            Constraint::Exists(bs, body) => Constraint::exists(bs.clone(), body.filter_atoms(keep)),
            c => c.clone(),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::True => f.write_str("true"),
            Constraint::False => f.write_str("false"),
            Constraint::Atom(a) => write!(f, "{a}"),
            Constraint::Eq(a, b) => write!(f, "{a} = {b}"),
            Constraint::Neq(a, b) => write!(f, "{a} != {b}"),
            Constraint::Holds(t) => write!(f, "holds({t})"),
            Constraint::And(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    match c {
                        Constraint::Exists(..) => write!(f, "({c})")?,
                        c => write!(f, "{c}")?,
                    }
                }
                Ok(())
            }
            Constraint::Exists(bs, body) => write!(f, "exists {}. {body}", bs.join(", ")),
        }
    }
}

/// Binder-to-term map, in binder order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Substitution {
    pub bindings: Vec<(String, Term)>,
}

impl Substitution {
    pub fn new(bindings: Vec<(String, Term)>) -> Self {
        Substitution { bindings }
    }

    pub fn from_parts(binders: &[String], terms: &[Term]) -> Self {
        Substitution { bindings: binders.iter().cloned().zip(terms.iter().cloned()).collect() }
    }

    pub fn get(&self, v: &str) -> Option<&Term> {
        self.bindings.iter().find(|(k, _)| k == v).map(|(_, t)| t)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    /// Same length as the binders and no binder occurs in a replacing term.
    pub fn is_admissible(&self, binders: &[String]) -> bool {
        self.bindings.len() == binders.len()
            && self.bindings.iter().all(|(_, t)| binders.iter().all(|b| !t.mentions(b)))
    }

    pub fn lookup_fn(&self) -> impl Fn(&str) -> Option<Term> + '_ {
        move |v| self.get(v).cloned()
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} -> {t}")?;
        }
        f.write_str("}")
    }
}

/// Per-engine supply of fresh variable names of the form `hint#n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fresh {
    next: u64,
}

impl Default for Fresh {
    fn default() -> Self {
        Fresh { next: 1 }
    }
}

impl Fresh {
    pub fn new() -> Self {
        Self::default()
    }

    /// Never returns the same name twice. Anything after a `#` or `$` in the
    /// hint is dropped so repeated freshening does not stack suffixes.
    pub fn var(&mut self, hint: &str) -> String {
        let base = hint.split(['#', '$']).next().unwrap_or(hint);
        let base = if base.is_empty() { "v" } else { base };
        let n = self.next;
        self.next += 1;
        format!("{base}#{n}")
    }
}

/// True for names minted by [`Fresh`]; the parsers never accept them in source.
pub fn is_generated(name: &str) -> bool {
    name.contains('#')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_names_are_monotone() {
        let mut f = Fresh::new();
        assert_eq!(f.var("k"), "k#1");
        assert_eq!(f.var("k"), "k#2");
        assert_eq!(f.var("go$3"), "go#3");
        assert_eq!(f.var("k#1"), "k#4");
    }

    #[test]
    fn and_flattens() {
        let a = Constraint::atom("a", vec![]);
        let b = Constraint::atom("b", vec![]);
        let nested = Constraint::and(vec![a.clone(), Constraint::and(vec![b.clone(), Constraint::True])]);
        assert_eq!(nested, Constraint::And(vec![a, b]));
    }

    #[test]
    fn subst_avoids_capture() {
        let c = Constraint::exists(vec!["y".into()], Constraint::atom("p", vec![Term::var("x"), Term::var("y")]));
        let s = c.subst(&|v| (v == "x").then(|| Term::var("y")));
        let Constraint::Exists(bs, body) = s else { panic!() };
        assert_ne!(bs[0], "y");
        assert_eq!(*body, Constraint::atom("p", vec![Term::var("y"), Term::var(bs[0].clone())]));
    }

    #[test]
    fn admissibility() {
        let bs = vec!["x".to_string()];
        assert!(Substitution::from_parts(&bs, &[Term::int(5)]).is_admissible(&bs));
        assert!(!Substitution::from_parts(&bs, &[Term::Tuple(vec![Term::var("x")])]).is_admissible(&bs));
        assert!(!Substitution::from_parts(&bs, &[]).is_admissible(&bs));
    }

    #[test]
    fn ack_is_atomwise() {
        let c = Constraint::and(vec![
            Constraint::atom("req", vec![Term::sym("a"), Term::var("k")]),
            Constraint::Holds(Term::bool(true)),
        ]);
        assert_eq!(c.ack(), Constraint::atom("ack_req", vec![Term::sym("a"), Term::var("k")]));
    }
}
