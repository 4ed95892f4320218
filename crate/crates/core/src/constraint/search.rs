//! Witness search over the finite universe of store terms.

use std::collections::{HashMap, HashSet};

use super::formula::{Atom, Constraint, Substitution};
use super::store::Store;
use super::term::Term;

type Binding = HashMap<String, Term>;

/// Finds values for `binders` making `body` entailed, if any.
pub fn exists_witness(store: &Store, binders: &[String], body: &Constraint) -> Option<Substitution> {
    // Rename binders apart from everything in the store.
    let mut names = Vec::new();
    let mut body = body.clone();
    let mut counter = 0usize;
    for b in binders {
        let n = format!("?{counter}");
        counter += 1;
        body = body.rename(b, &n);
        names.push(n);
    }
    let mut literals = Vec::new();
    flatten(&body, &mut names, &mut literals, &mut counter);
    let atoms: Vec<Atom> = literals
        .iter()
        .filter_map(|l| match l {
            Constraint::Atom(a) => Some(a.clone()),
            _ => None,
        })
        .collect();
    let rest: Vec<Constraint> = literals.into_iter().filter(|l| !matches!(l, Constraint::Atom(_))).collect();
    let universe = store.universe();
    let mut found = None;
    solve_atoms(store, &names, &atoms, &rest, universe, &mut Binding::new(), &mut found);
    found.map(|b| {
        Substitution::new(
            binders
                .iter()
                .zip(&names)
                .map(|(orig, n)| (orig.clone(), b.get(n).cloned().unwrap_or(Term::var(n.clone()))))
                .collect(),
        )
    })
}

/// Splits a constraint into literals, lifting nested existentials.
fn flatten(c: &Constraint, names: &mut Vec<String>, out: &mut Vec<Constraint>, counter: &mut usize) {
    match c {
        Constraint::And(cs) => cs.iter().for_each(|c| flatten(c, names, out, counter)),
        Constraint::Exists(bs, body) => {
            let mut body = (**body).clone();
            for b in bs {
                let n = format!("?{counter}");
                *counter += 1;
                body = body.rename(b, &n);
                names.push(n);
            }
            flatten(&body, names, out, counter);
        }
        Constraint::True => {}
        c => out.push(c.clone()),
    }
}

fn is_pattern(t: &Term, names: &[String]) -> bool {
    match t {
        Term::Var(_) | Term::Const(_) => true,
        Term::Tuple(ts) => ts.iter().all(|t| is_pattern(t, names)),
        Term::Apply(..) => !names.iter().any(|n| t.mentions(n)),
    }
}

fn bind_term(t: &Term, b: &Binding) -> Term {
    t.subst(&|v| b.get(v).cloned()).normalize()
}

fn unbound_in(t: &Term, names: &[String], b: &Binding) -> bool {
    names.iter().any(|n| !b.contains_key(n) && t.mentions(n))
}

/// Every way of extending `b` so that pattern `p` equals store term `t`.
fn match_term(store: &Store, p: &Term, t: &Term, names: &[String], b: &Binding) -> Vec<Binding> {
    if !unbound_in(p, names, b) {
        return if store.equiv(&bind_term(p, b), t) { vec![b.clone()] } else { vec![] };
    }
    match p {
        Term::Var(v) => {
            let mut nb = b.clone();
            nb.insert(v.clone(), t.clone());
            vec![nb]
        }
        Term::Tuple(ps) => {
            let mut shapes: Vec<Vec<Term>> = Vec::new();
            if let Term::Tuple(ts) = t {
                shapes.push(ts.clone());
            }
            for m in store_tuple_members(store, t) {
                if !shapes.contains(&m) {
                    shapes.push(m);
                }
            }
            let mut out = Vec::new();
            for ts in shapes.into_iter().filter(|ts| ts.len() == ps.len()) {
                let mut partial = vec![b.clone()];
                for (pi, ti) in ps.iter().zip(&ts) {
                    partial = partial.iter().flat_map(|pb| match_term(store, pi, ti, names, pb)).collect();
                    if partial.is_empty() {
                        break;
                    }
                }
                out.extend(partial);
            }
            out
        }
        _ => vec![],
    }
}

fn store_tuple_members(store: &Store, t: &Term) -> Vec<Vec<Term>> {
    store
        .universe()
        .iter()
        .filter_map(|u| match u {
            Term::Tuple(ts) if store.equiv(u, t) => Some(ts.clone()),
            _ => None,
        })
        .collect()
}

fn solve_atoms(
    store: &Store,
    names: &[String],
    atoms: &[Atom],
    rest: &[Constraint],
    universe: &[Term],
    b: &mut Binding,
    found: &mut Option<Binding>,
) {
    if found.is_some() {
        return;
    }
    // Drive with the first atom that still has unbound pattern positions.
    let next = atoms.iter().position(|a| a.args.iter().all(|t| is_pattern(t, names)));
    let Some(i) = next else {
        // Remaining atoms (if any) contain operator terms over binders.
        let leftovers: Vec<Constraint> =
            atoms.iter().cloned().map(Constraint::Atom).chain(rest.iter().cloned()).collect();
        enumerate_rest(store, names, &leftovers, universe, b, found);
        return;
    };
    let atom = &atoms[i];
    let others: Vec<Atom> = atoms.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, a)| a.clone()).collect();
    for fact in store.facts_for(&atom.pred, atom.args.len()) {
        let mut partial = vec![b.clone()];
        for (p, t) in atom.args.iter().zip(&fact.args) {
            partial = partial.iter().flat_map(|pb| match_term(store, p, t, names, pb)).collect();
            if partial.is_empty() {
                break;
            }
        }
        for mut pb in partial {
            solve_atoms(store, names, &others, rest, universe, &mut pb, found);
            if found.is_some() {
                return;
            }
        }
    }
}

fn enumerate_rest(
    store: &Store,
    names: &[String],
    lits: &[Constraint],
    universe: &[Term],
    b: &mut Binding,
    found: &mut Option<Binding>,
) {
    let open: Vec<&String> =
        names.iter().filter(|n| !b.contains_key(*n) && lits.iter().any(|l| l.free_vars().contains(*n))).collect();
    if let Some(n) = open.first() {
        for u in universe.iter().chain(lits.iter().flat_map(|l| l.constants()).collect::<Vec<_>>().iter()) {
            b.insert((*n).clone(), u.clone());
            enumerate_rest(store, names, lits, universe, b, found);
            if found.is_some() {
                return;
            }
        }
        b.remove(*n);
        return;
    }
    let ok = lits.iter().all(|l| store.entails_normalized(&l.subst(&|v| b.get(v).cloned()).normalize()));
    if ok {
        *found = Some(b.clone());
    }
}

/// All admissible substitutions for `binders` that make `guard` entailed and
/// are not in `already_used`, in lexicographic order over the candidate
/// universe (store terms followed by guard constants).
pub fn match_abstraction(
    store: &Store,
    binders: &[String],
    guard: &Constraint,
    already_used: &[Substitution],
) -> Vec<Substitution> {
    matches(store, binders, guard, already_used, usize::MAX)
}

/// The first substitution [`match_abstraction`] would return.
pub fn first_match(
    store: &Store,
    binders: &[String],
    guard: &Constraint,
    already_used: &[Substitution],
) -> Option<Substitution> {
    matches(store, binders, guard, already_used, 1).pop()
}

fn matches(
    store: &Store,
    binders: &[String],
    guard: &Constraint,
    already_used: &[Substitution],
    limit: usize,
) -> Vec<Substitution> {
    let guard = guard.normalize();
    let extra: Vec<Term> = guard.constants().into_iter().filter(|c| !store.in_universe(c)).collect();
    let mut universe: Vec<&Term> = store.universe().iter().collect();
    for c in &extra {
        if !universe.contains(&c) {
            universe.push(c);
        }
    }
    let used: HashSet<&Substitution> = already_used.iter().collect();
    if store.is_inconsistent() {
        // Everything is entailed; restrict to the candidate universe as usual.
        return Product::new(binders, vec![universe; binders.len()])
            .filter(|s| s.is_admissible(binders) && !used.contains(s))
            .take(limit)
            .collect();
    }
    // A binder that is an argument of a top-level guard atom can only take
    // values equal to that argument position in some fact.
    let mut literals = Vec::new();
    flatten_top(&guard, &mut literals);
    // Without equalities term equivalence is syntactic, so membership in the
    // set of fact arguments decides the filter.
    let syntactic = store.equalities().is_empty();
    let per_binder: Vec<Vec<&Term>> = binders
        .iter()
        .map(|x| {
            let xv = Term::var(x.clone());
            if syntactic {
                let mut allowed: Option<HashSet<&Term>> = None;
                for a in literals.iter().filter_map(|l| if let Constraint::Atom(a) = l { Some(a) } else { None }) {
                    for (pos, _) in a.args.iter().enumerate().filter(|(_, arg)| **arg == xv) {
                        let here: HashSet<&Term> =
                            store.facts_for(&a.pred, a.args.len()).map(|f| &f.args[pos]).collect();
                        allowed = Some(match allowed {
                            None => here,
                            Some(prev) => prev.intersection(&here).copied().collect(),
                        });
                    }
                }
                return universe.iter().copied().filter(|u| allowed.as_ref().is_none_or(|s| s.contains(u))).collect();
            }
            universe
                .iter()
                .copied()
                .filter(|u| {
                    literals.iter().all(|l| match l {
                        Constraint::Atom(a) => a.args.iter().enumerate().all(|(pos, arg)| {
                            *arg != xv || store.facts_for(&a.pred, a.args.len()).any(|f| store.equiv(u, &f.args[pos]))
                        }),
                        _ => true,
                    })
                })
                .collect()
        })
        .collect();
    Product::new(binders, per_binder)
        .filter(|s| s.is_admissible(binders) && !used.contains(s))
        .filter(|s| store.entails(&guard.subst_map(s)))
        .take(limit)
        .collect()
}

fn flatten_top(c: &Constraint, out: &mut Vec<Constraint>) {
    match c {
        Constraint::And(cs) => cs.iter().for_each(|c| flatten_top(c, out)),
        c => out.push(c.clone()),
    }
}

/// Lexicographic enumeration of one choice per binder, first binder slowest.
struct Product<'a> {
    binders: &'a [String],
    choices: Vec<Vec<&'a Term>>,
    idx: Vec<usize>,
    done: bool,
}

impl<'a> Product<'a> {
    fn new(binders: &'a [String], choices: Vec<Vec<&'a Term>>) -> Self {
        let done = choices.iter().any(Vec::is_empty);
        Product { binders, idx: vec![0; choices.len()], choices, done }
    }
}

impl Iterator for Product<'_> {
    type Item = Substitution;

    fn next(&mut self) -> Option<Substitution> {
        if self.done {
            return None;
        }
        let terms: Vec<Term> = self.idx.iter().zip(&self.choices).map(|(&i, c)| c[i].clone()).collect();
        let mut k = self.idx.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.idx[k] += 1;
            if self.idx[k] < self.choices[k].len() {
                break;
            }
            self.idx[k] = 0;
        }
        Some(Substitution::from_parts(self.binders, &terms))
    }
}
