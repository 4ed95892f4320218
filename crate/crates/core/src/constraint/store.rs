use std::collections::{HashMap, HashSet};

use super::formula::{Atom, Constraint, Fresh};
use super::search;
use super::term::{Term, Value};
use crate::error::ConstraintError;

/// Conjunction of told constraints with an equality decision procedure.
///
/// Equalities live in a union-find over every registered term; tuples are
/// congruence-closed and injective. Operator applications are uninterpreted.
#[derive(Debug, Clone, Default)]
pub struct Store {
    facts: Vec<Atom>,
    by_pred: HashMap<String, Vec<usize>>,
    arities: HashMap<String, usize>,
    told_eqs: Vec<(Term, Term)>,
    diseqs: Vec<(Term, Term)>,
    tests: Vec<Term>,
    hidden: Vec<String>,
    inconsistent: bool,
    nodes: Vec<Term>,
    index: HashMap<Term, usize>,
    parent: Vec<usize>,
    members: HashMap<usize, Vec<usize>>,
    fresh: Fresh,
    version: u64,
    universe: Vec<Term>,
    in_universe: HashSet<Term>,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fresh(fresh: Fresh) -> Self {
        Store { fresh, ..Self::default() }
    }

    /// Hands the name supply back so the next store continues numbering.
    pub fn fresh(&self) -> &Fresh {
        &self.fresh
    }

    pub fn fresh_mut(&mut self) -> &mut Fresh {
        &mut self.fresh
    }

    pub fn facts(&self) -> &[Atom] {
        &self.facts
    }

    pub fn equalities(&self) -> &[(Term, Term)] {
        &self.told_eqs
    }

    pub fn disequalities(&self) -> &[(Term, Term)] {
        &self.diseqs
    }

    pub fn hidden(&self) -> &[String] {
        &self.hidden
    }

    pub fn add_hidden(&mut self, name: String) {
        if !self.hidden.contains(&name) {
            self.hidden.push(name);
        }
    }

    pub fn is_inconsistent(&self) -> bool {
        self.inconsistent
    }

    /// Bumped whenever new information arrives.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn facts_for(&self, pred: &str, arity: usize) -> impl Iterator<Item = &Atom> {
        self.by_pred
            .get(pred)
            .into_iter()
            .flatten()
            .map(move |&i| &self.facts[i])
            .filter(move |a| a.args.len() == arity)
    }

    /// Functional merge: the returned store entails both inputs.
    pub fn tell_merge(&self, c: &Constraint) -> Result<Store, ConstraintError> {
        let mut s = self.clone();
        s.tell(c)?;
        Ok(s)
    }

    pub fn tell(&mut self, c: &Constraint) -> Result<(), ConstraintError> {
        let c = c.normalize();
        self.check_arities(&c)?;
        self.tell_checked(&c);
        Ok(())
    }

    fn check_arities(&self, c: &Constraint) -> Result<(), ConstraintError> {
        let mut local: HashMap<&str, usize> = HashMap::new();
        for a in c.atoms() {
            let expected = self.arities.get(&a.pred).copied().or_else(|| local.get(a.pred.as_str()).copied());
            match expected {
                Some(n) if n != a.args.len() => {
                    return Err(ConstraintError::ArityClash { pred: a.pred.clone(), expected: n, found: a.args.len() })
                }
                _ => {
                    local.insert(&a.pred, a.args.len());
                }
            }
        }
        Ok(())
    }

    fn tell_checked(&mut self, c: &Constraint) {
        match c {
            Constraint::True => {}
            Constraint::False => self.mark_inconsistent(),
            Constraint::Atom(a) => self.add_fact(a.clone()),
            Constraint::Eq(a, b) => {
                if !self.equiv(a, b) {
                    self.told_eqs.push((a.clone(), b.clone()));
                    self.version += 1;
                }
                let (x, y) = (self.register(a), self.register(b));
                self.union(x, y);
                self.recheck_diseqs();
            }
            Constraint::Neq(a, b) => {
                if !self.diseqs.contains(&(a.clone(), b.clone())) {
                    self.register(a);
                    self.register(b);
                    self.diseqs.push((a.clone(), b.clone()));
                    self.version += 1;
                }
                self.recheck_diseqs();
            }
            Constraint::Holds(t) => match self.resolve(t).normalize() {
                Term::Const(Value::Bool(true)) => {}
                Term::Const(_) => self.mark_inconsistent(),
                t => {
                    if !self.tests.contains(&t) {
                        self.tests.push(t);
                        self.version += 1;
                    }
                }
            },
            Constraint::And(cs) => cs.iter().for_each(|c| self.tell_checked(c)),
            Constraint::Exists(bs, body) => {
                let mut body = (**body).clone();
                for b in bs {
                    let name = if self.mentions(b) { self.fresh.var(b) } else { b.clone() };
                    if &name != b {
                        body = body.rename(b, &name);
                    }
                    self.add_hidden(name);
                }
                self.tell_checked(&body);
            }
        }
    }

    fn mark_inconsistent(&mut self) {
        if !self.inconsistent {
            self.inconsistent = true;
            self.version += 1;
        }
    }

    fn add_fact(&mut self, a: Atom) {
        if self.by_pred.get(&a.pred).is_some_and(|ix| ix.iter().any(|&i| self.facts[i] == a)) {
            return;
        }
        self.arities.insert(a.pred.clone(), a.args.len());
        for t in &a.args {
            self.register(t);
            let mut subs = Vec::new();
            t.subterms(&mut subs);
            for sub in subs {
                if !self.in_universe.contains(sub) {
                    self.in_universe.insert(sub.clone());
                    self.universe.push(sub.clone());
                }
            }
        }
        self.by_pred.entry(a.pred.clone()).or_default().push(self.facts.len());
        self.facts.push(a);
        self.version += 1;
    }

    fn mentions(&self, name: &str) -> bool {
        self.hidden.iter().any(|h| h == name)
            || self.nodes.iter().any(|t| t.mentions(name))
            || self.tests.iter().any(|t| t.mentions(name))
    }

    // ---- union-find -------------------------------------------------------

    fn register(&mut self, t: &Term) -> usize {
        if let Some(&i) = self.index.get(t) {
            return i;
        }
        if let Term::Tuple(ts) | Term::Apply(_, ts) = t {
            for s in ts {
                self.register(s);
            }
        }
        let i = self.nodes.len();
        self.nodes.push(t.clone());
        self.index.insert(t.clone(), i);
        self.parent.push(i);
        self.members.insert(i, vec![i]);
        // A new compound may be congruent to an existing one.
        if matches!(t, Term::Tuple(_) | Term::Apply(..)) {
            if let Some(j) = (0..i).find(|&j| self.congruent(i, j)) {
                self.union(i, j);
            }
        }
        i
    }

    fn find(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn congruent(&self, i: usize, j: usize) -> bool {
        match (&self.nodes[i], &self.nodes[j]) {
            (Term::Tuple(a), Term::Tuple(b)) if a.len() == b.len() => {
                a.iter().zip(b).all(|(x, y)| self.find(self.index[x]) == self.find(self.index[y]))
            }
            (Term::Apply(o1, a), Term::Apply(o2, b)) if o1 == o2 && a.len() == b.len() => {
                a.iter().zip(b).all(|(x, y)| self.find(self.index[x]) == self.find(self.index[y]))
            }
            _ => false,
        }
    }

    fn union(&mut self, a: usize, b: usize) {
        let mut pending = vec![(a, b)];
        while let Some((a, b)) = pending.pop() {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra == rb {
                continue;
            }
            let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[drop] = keep;
            let moved = self.members.remove(&drop).unwrap_or_default();
            self.members.entry(keep).or_default().extend(moved);
            self.version += 1;
            let class = self.members[&keep].clone();
            // Clashes and tuple injectivity.
            let consts: Vec<&Value> = class.iter().filter_map(|&i| self.nodes[i].as_const()).collect();
            if consts.windows(2).any(|w| w[0] != w[1]) {
                self.inconsistent = true;
            }
            let tuples: Vec<usize> =
                class.iter().copied().filter(|&i| matches!(self.nodes[i], Term::Tuple(_))).collect();
            if !consts.is_empty() && !tuples.is_empty() {
                self.inconsistent = true;
            }
            for w in tuples.windows(2) {
                let (Term::Tuple(x), Term::Tuple(y)) = (&self.nodes[w[0]], &self.nodes[w[1]]) else { unreachable!() };
                if x.len() != y.len() {
                    self.inconsistent = true;
                } else {
                    for (p, q) in x.iter().zip(y) {
                        pending.push((self.index[p], self.index[q]));
                    }
                }
            }
            // Congruence: compounds whose children are now equal.
            let compounds: Vec<usize> =
                (0..self.nodes.len()).filter(|&i| matches!(self.nodes[i], Term::Tuple(_) | Term::Apply(..))).collect();
            for (x, &i) in compounds.iter().enumerate() {
                for &j in &compounds[x + 1..] {
                    if self.find(i) != self.find(j) && self.congruent(i, j) {
                        pending.push((i, j));
                    }
                }
            }
        }
    }

    fn recheck_diseqs(&mut self) {
        if self.diseqs.iter().any(|(a, b)| self.equiv(a, b)) {
            self.mark_inconsistent();
        }
    }

    fn class_of(&self, t: &Term) -> Option<usize> {
        self.index.get(t).map(|&i| self.find(i))
    }

    fn class_members<'a>(&'a self, t: &'a Term) -> Vec<&'a Term> {
        match self.class_of(t) {
            Some(r) => self.members[&r].iter().map(|&i| &self.nodes[i]).collect(),
            None => vec![t],
        }
    }

    /// The constant a term is known to equal, if any.
    pub fn const_of(&self, t: &Term) -> Option<Value> {
        if let Term::Const(v) = t {
            return Some(v.clone());
        }
        self.class_members(t).into_iter().find_map(|m| m.as_const().cloned())
    }

    /// Replaces variables by the constants they are known to equal.
    pub fn resolve(&self, t: &Term) -> Term {
        t.subst(&|v| self.const_of(&Term::var(v)).map(Term::Const))
    }

    /// Decides `a = b` modulo the told equalities.
    pub fn equiv(&self, a: &Term, b: &Term) -> bool {
        if a == b {
            return true;
        }
        if let (Term::Const(_), Term::Const(_)) = (a, b) {
            return false;
        }
        if let (Some(x), Some(y)) = (self.class_of(a), self.class_of(b)) {
            // Registered constants are nodes themselves, so distinct classes
            // can never share one.
            return x == y;
        }
        if let (Some(x), Some(y)) = (self.const_of(a), self.const_of(b)) {
            if x == y {
                return true;
            }
        }
        // Structural comparison through at least one unregistered compound.
        if self.index.contains_key(a) && self.index.contains_key(b) {
            return false;
        }
        let left = self.class_members(a);
        let right = self.class_members(b);
        for l in &left {
            for r in &right {
                let same = match (l, r) {
                    (Term::Tuple(x), Term::Tuple(y)) => {
                        x.len() == y.len() && x.iter().zip(y).all(|(p, q)| self.equiv(p, q))
                    }
                    (Term::Apply(o1, x), Term::Apply(o2, y)) => {
                        o1 == o2 && x.len() == y.len() && x.iter().zip(y).all(|(p, q)| self.equiv(p, q))
                    }
                    _ => false,
                };
                if same && (!self.index.contains_key(l) || !self.index.contains_key(r)) {
                    return true;
                }
            }
        }
        false
    }

    /// Decides `a != b`: recorded disequality, or distinct constructors.
    pub fn distinct(&self, a: &Term, b: &Term) -> bool {
        if self
            .diseqs
            .iter()
            .any(|(x, y)| (self.equiv(a, x) && self.equiv(b, y)) || (self.equiv(a, y) && self.equiv(b, x)))
        {
            return true;
        }
        if let (Some(x), Some(y)) = (self.const_of(a), self.const_of(b)) {
            return x != y;
        }
        let tuples = |t: &Term| -> Vec<Vec<Term>> {
            self.class_members(t)
                .into_iter()
                .filter_map(|m| match m {
                    Term::Tuple(ts) => Some(ts.clone()),
                    _ => None,
                })
                .collect()
        };
        let (ta, tb) = (tuples(a), tuples(b));
        if (self.const_of(a).is_some() && !tb.is_empty()) || (self.const_of(b).is_some() && !ta.is_empty()) {
            return true;
        }
        ta.iter().any(|x| tb.iter().any(|y| x.len() != y.len() || x.iter().zip(y).any(|(p, q)| self.distinct(p, q))))
    }

    fn atom_entailed(&self, a: &Atom) -> bool {
        self.facts_for(&a.pred, a.args.len()).any(|f| f.args == a.args)
            || self.facts_for(&a.pred, a.args.len()).any(|f| f.args.iter().zip(&a.args).all(|(x, y)| self.equiv(x, y)))
    }

    pub fn entails(&self, c: &Constraint) -> bool {
        if self.inconsistent {
            return true;
        }
        self.entails_normalized(&c.normalize())
    }

    pub(crate) fn entails_normalized(&self, c: &Constraint) -> bool {
        if self.inconsistent {
            return true;
        }
        match c {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::Atom(a) => self.atom_entailed(a),
            Constraint::Eq(a, b) => self.equiv(a, b),
            Constraint::Neq(a, b) => self.distinct(a, b),
            Constraint::Holds(t) => {
                matches!(self.resolve(t).normalize(), Term::Const(Value::Bool(true))) || self.tests.contains(t)
            }
            Constraint::And(cs) => cs.iter().all(|c| self.entails_normalized(c)),
            Constraint::Exists(bs, body) => search::exists_witness(self, bs, body).is_some(),
        }
    }

    /// Candidate terms for abstraction matching: every term occurring in a
    /// fact, in insertion order.
    pub fn universe(&self) -> &[Term] {
        &self.universe
    }

    pub fn in_universe(&self, t: &Term) -> bool {
        self.in_universe.contains(t)
    }

    /// The store's content as a single constraint, with `vars` projected away.
    pub fn hide(&self, vars: &[String]) -> Constraint {
        if self.inconsistent {
            return Constraint::False;
        }
        let body = self.content();
        Constraint::exists(vars.to_vec(), body)
    }

    pub fn content(&self) -> Constraint {
        if self.inconsistent {
            return Constraint::False;
        }
        Constraint::and(
            self.facts
                .iter()
                .cloned()
                .map(Constraint::Atom)
                .chain(self.told_eqs.iter().map(|(a, b)| Constraint::Eq(a.clone(), b.clone())))
                .chain(self.diseqs.iter().map(|(a, b)| Constraint::Neq(a.clone(), b.clone())))
                .chain(self.tests.iter().cloned().map(Constraint::Holds)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn out(k: Term, v: Term) -> Constraint {
        Constraint::atom("out", vec![k, v])
    }

    #[test]
    fn single_fact_and_idempotence() {
        let s = Store::new().tell_merge(&out(Term::sym("k"), Term::int(5))).unwrap();
        assert_eq!(s.facts().len(), 1);
        let again = s.tell_merge(&out(Term::sym("k"), Term::int(5))).unwrap();
        assert_eq!(again.facts(), s.facts());
    }

    #[test]
    fn clashing_constants_make_store_inconsistent() {
        let s = Store::new()
            .tell_merge(&Constraint::Eq(Term::var("x"), Term::int(3)))
            .unwrap()
            .tell_merge(&Constraint::Eq(Term::var("x"), Term::int(4)))
            .unwrap();
        assert!(s.is_inconsistent());
        assert!(s.entails(&Constraint::False));
        assert!(s.entails(&Constraint::atom("anything", vec![])));
    }

    #[test]
    fn membership_and_empty_store() {
        let s = Store::new()
            .tell_merge(&Constraint::and(vec![
                out(Term::sym("k"), Term::int(5)),
                Constraint::atom("acc", vec![Term::sym("a"), Term::sym("k")]),
            ]))
            .unwrap();
        assert!(s.entails(&out(Term::sym("k"), Term::int(5))));
        assert!(!Store::new().entails(&Constraint::atom("req", vec![Term::sym("a"), Term::sym("k")])));
    }

    #[test]
    fn existential_entailment_uses_store_witnesses() {
        let s = Store::new().tell_merge(&Constraint::atom("req", vec![Term::sym("a"), Term::sym("k7")])).unwrap();
        let q = Constraint::exists(vec!["k".into()], Constraint::atom("req", vec![Term::sym("a"), Term::var("k")]));
        assert!(s.entails(&q));
    }

    #[test]
    fn arity_clash_is_an_error() {
        let s = Store::new().tell_merge(&Constraint::atom("p", vec![Term::int(1)])).unwrap();
        assert!(matches!(
            s.tell_merge(&Constraint::atom("p", vec![Term::int(1), Term::int(2)])),
            Err(ConstraintError::ArityClash { .. })
        ));
    }

    #[test]
    fn congruence_over_tuples() {
        let tup = |x: Term| Term::Tuple(vec![x, Term::int(1)]);
        let s = Store::new()
            .tell_merge(&Constraint::Eq(Term::var("x"), Term::var("y")))
            .unwrap()
            .tell_merge(&Constraint::atom("p", vec![tup(Term::var("x"))]))
            .unwrap();
        assert!(s.entails(&Constraint::atom("p", vec![tup(Term::var("y"))])));
        let inj = Store::new().tell_merge(&Constraint::Eq(tup(Term::var("a")), tup(Term::var("b")))).unwrap();
        assert!(inj.entails(&Constraint::Eq(Term::var("a"), Term::var("b"))));
    }

    #[test]
    fn disequality_entailment() {
        let s = Store::new();
        assert!(s.entails(&Constraint::Neq(Term::int(1), Term::int(2))));
        assert!(!s.entails(&Constraint::Neq(Term::var("x"), Term::int(2))));
        let s = s.tell_merge(&Constraint::Neq(Term::var("x"), Term::int(2))).unwrap();
        assert!(s.entails(&Constraint::Neq(Term::int(2), Term::var("x"))));
        let bad = s.tell_merge(&Constraint::Eq(Term::var("x"), Term::int(2))).unwrap();
        assert!(bad.is_inconsistent());
    }

    #[test]
    fn hide_projects_local_names() {
        let s = Store::new().tell_merge(&Constraint::atom("out'", vec![Term::var("stop")])).unwrap();
        assert_eq!(
            s.hide(&["stop".into()]),
            Constraint::exists(vec!["stop".into()], Constraint::atom("out'", vec![Term::var("stop")]))
        );
        let s = Store::new().tell_merge(&out(Term::sym("k"), Term::int(5))).unwrap();
        assert_eq!(s.hide(&[]), out(Term::sym("k"), Term::int(5)));
        let mut bad = Store::new();
        bad.tell(&Constraint::False).unwrap();
        assert_eq!(bad.hide(&["x".into()]), Constraint::False);
    }

    #[test]
    fn told_existential_records_hidden_witness() {
        let mut s = Store::new();
        s.tell(&Constraint::atom("p", vec![Term::var("x")])).unwrap();
        s.tell(&Constraint::exists(vec!["x".into()], Constraint::atom("q", vec![Term::var("x")]))).unwrap();
        assert_eq!(s.hidden().len(), 1);
        assert_ne!(s.hidden()[0], "x");
        assert!(!s.entails(&Constraint::atom("q", vec![Term::var("x")])));
    }

    #[test]
    fn holds_uses_known_constants() {
        let s = Store::new().tell_merge(&Constraint::Eq(Term::var("m"), Term::int(600))).unwrap();
        let le = Constraint::Holds(Term::apply(super::super::Op::Le, vec![Term::var("m"), Term::int(500)]));
        assert!(!s.entails(&le));
        let gt = Constraint::Holds(Term::apply(super::super::Op::Gt, vec![Term::var("m"), Term::int(500)]));
        assert!(s.entails(&gt));
    }
}
