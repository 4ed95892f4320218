//! Generators, brute-force oracles and seeded property suites. Shared by the
//! core property tests and the acceptance runner, which include this file.

#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use sesscc_core::constraint::{match_abstraction, Store, Substitution};
use sesscc_core::fltl::{check_eventually, extract, syntactically_eventually, Verdict};
use sesscc_core::utcc::{congr_normalize, obs_equiv, Engine, Process, Trace, UnitOutput, OUT_PRIME};
use sesscc_core::{Atom, Constraint, Term};

pub const SEED: u64 = 0x5e55_cc00_2024_0001;

/// A runner with a fixed seed and no failure persistence.
pub fn runner(cases: u32, salt: u64) -> TestRunner {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&SEED.to_le_bytes());
    seed[8..16].copy_from_slice(&salt.to_le_bytes());
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &seed))
}

fn run_suite<S: Strategy>(
    cases: u32,
    salt: u64,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases, salt).run(&strategy, test).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Constraints

const CONSTS: [&str; 4] = ["a", "b", "1", "2"];

fn constant(s: &str) -> Term {
    s.parse::<i64>().map_or_else(|_| Term::sym(s), Term::int)
}

fn ground_term() -> impl Strategy<Value = Term> + Clone {
    prop::sample::select(CONSTS.to_vec()).prop_map(constant)
}

fn any_term() -> impl Strategy<Value = Term> + Clone {
    prop_oneof![3 => ground_term(), 1 => prop::sample::select(vec!["x", "y"]).prop_map(Term::var)]
}

/// `p/1`, `q/2`, `r/2`: fixed arities so telling never clashes.
fn atom_over(t: impl Strategy<Value = Term> + Clone) -> impl Strategy<Value = Atom> {
    prop_oneof![
        t.clone().prop_map(|a| Atom::new("p", vec![a])),
        (t.clone(), t.clone()).prop_map(|(a, b)| Atom::new("q", vec![a, b])),
        (t.clone(), t).prop_map(|(a, b)| Atom::new("r", vec![a, b])),
    ]
}

#[derive(Debug, Clone)]
pub enum Item {
    Fact(Atom),
    Eq(Term, Term),
}

fn item() -> impl Strategy<Value = Item> {
    prop_oneof![
        4 => atom_over(any_term()).prop_map(Item::Fact),
        1 => (prop::sample::select(vec!["x", "y"]).prop_map(Term::var), any_term()).prop_map(|(a, b)| Item::Eq(a, b)),
    ]
}

fn ground_item() -> impl Strategy<Value = Item> {
    prop_oneof![
        5 => atom_over(ground_term()).prop_map(Item::Fact),
        1 => (prop::sample::select(vec!["x", "y"]).prop_map(Term::var), ground_term()).prop_map(|(a, b)| Item::Eq(a, b)),
    ]
}

fn item_constraint(i: &Item) -> Constraint {
    match i {
        Item::Fact(a) => Constraint::Atom(a.clone()),
        Item::Eq(a, b) => Constraint::Eq(a.clone(), b.clone()),
    }
}

fn store_of(items: &[Item]) -> Store {
    let mut s = Store::new();
    for i in items {
        s.tell(&item_constraint(i)).expect("fixed arities");
    }
    s
}

/// Queries: atoms, equalities, conjunctions and `exists z.` over a body
/// that mentions `z` in an atom. Half the literals are drawn from `items` so
/// that entailed queries are common.
fn query_near(items: Vec<Item>) -> BoxedStrategy<Constraint> {
    let z = || prop_oneof![2 => Just(Term::var("z")), 1 => any_term()];
    let ex = (atom_over(z()), prop::option::of(atom_over(z()))).prop_map(|(a, b)| {
        let mut parts = vec![Constraint::Atom(force_z(a))];
        parts.extend(b.map(Constraint::Atom));
        Constraint::exists(vec!["z".into()], Constraint::and(parts))
    });
    let random = prop_oneof![
        4 => atom_over(any_term()).prop_map(Constraint::Atom),
        1 => (any_term(), any_term()).prop_map(|(a, b)| Constraint::Eq(a, b)),
        2 => ex,
    ];
    let facts: Vec<Atom> =
        items.iter().filter_map(|i| if let Item::Fact(a) = i { Some(a.clone()) } else { None }).collect();
    let unit = if facts.is_empty() {
        random.boxed()
    } else {
        let told = prop::sample::select(items.clone()).prop_map(|i| item_constraint(&i));
        let abstracted = prop::sample::select(facts).prop_map(|mut a| {
            a.args[0] = Term::var("z");
            Constraint::exists(vec!["z".into()], Constraint::Atom(a))
        });
        prop_oneof![2 => random, 2 => told, 1 => abstracted].boxed()
    };
    prop::collection::vec(unit, 1..=3)
        .prop_map(|mut v| if v.len() == 1 { v.pop().unwrap() } else { Constraint::and(v) })
        .boxed()
}

fn query() -> BoxedStrategy<Constraint> {
    query_near(Vec::new())
}

fn force_z(mut a: Atom) -> Atom {
    if !a.args.iter().any(|t| t.mentions("z")) {
        a.args[0] = Term::var("z");
    }
    a
}

/// Union-find free model of a store of facts and equalities.
pub struct Model {
    facts: Vec<Atom>,
    classes: Vec<BTreeSet<Term>>,
}

impl Model {
    pub fn new(items: &[Item]) -> Model {
        let mut m = Model { facts: Vec::new(), classes: Vec::new() };
        for i in items {
            match i {
                Item::Fact(a) => m.facts.push(a.clone()),
                Item::Eq(a, b) => m.merge(a, b),
            }
        }
        m
    }

    fn class_of(&self, t: &Term) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(t))
    }

    fn merge(&mut self, a: &Term, b: &Term) {
        let ia = self.class_of(a).unwrap_or_else(|| {
            self.classes.push(BTreeSet::from([a.clone()]));
            self.classes.len() - 1
        });
        let ib = self.class_of(b).unwrap_or_else(|| {
            self.classes.push(BTreeSet::from([b.clone()]));
            self.classes.len() - 1
        });
        if ia != ib {
            let moved = self.classes[ib].clone();
            self.classes[ia].extend(moved);
            self.classes.remove(ib);
        }
    }

    fn equiv(&self, a: &Term, b: &Term) -> bool {
        a == b || self.class_of(a).is_some_and(|i| self.classes[i].contains(b))
    }

    pub fn inconsistent(&self) -> bool {
        self.classes.iter().any(|c| c.iter().filter(|t| t.is_ground()).count() > 1)
    }

    /// Every term the store mentions plus the fixed constants.
    fn candidates(&self) -> Vec<Term> {
        let mut out: BTreeSet<Term> = CONSTS.iter().map(|c| constant(c)).collect();
        out.extend(["x", "y"].map(Term::var));
        out.extend(self.facts.iter().flat_map(|a| a.args.iter().cloned()));
        out.extend(self.classes.iter().flatten().cloned());
        out.into_iter().collect()
    }

    pub fn entails(&self, c: &Constraint) -> bool {
        if self.inconsistent() {
            return true;
        }
        match c {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::Atom(a) => self.facts.iter().any(|f| {
                f.pred == a.pred
                    && f.args.len() == a.args.len()
                    && f.args.iter().zip(&a.args).all(|(x, y)| self.equiv(x, y))
            }),
            Constraint::Eq(a, b) => self.equiv(a, b),
            Constraint::And(cs) => cs.iter().all(|c| self.entails(c)),
            Constraint::Exists(vs, body) => self.exists(vs, body),
            other => panic!("model does not cover {other}"),
        }
    }

    fn exists(&self, vs: &[String], body: &Constraint) -> bool {
        let Some((v, rest)) = vs.split_first() else {
            return self.entails(body);
        };
        self.candidates().iter().any(|t| {
            let inst = body.subst(&|n| (n == v).then(|| t.clone()));
            self.exists(rest, &inst)
        })
    }
}

fn flatten_items(c: &Constraint, out: &mut Vec<Item>) -> bool {
    match c {
        Constraint::True => true,
        Constraint::Atom(a) => {
            out.push(Item::Fact(a.clone()));
            true
        }
        Constraint::Eq(a, b) => {
            out.push(Item::Eq(a.clone(), b.clone()));
            true
        }
        Constraint::And(cs) => cs.iter().all(|c| flatten_items(c, out)),
        _ => false,
    }
}

/// Entailment against the model, then monotonicity under any further tell,
/// then cut. Stores merged with existential-free constraints are also
/// compared with the model.
pub fn monotonicity_and_cut(cases: u32) -> Result<(), String> {
    let strategy = prop::collection::vec(item(), 0..6).prop_flat_map(|items| {
        let more = prop::collection::vec(item(), 0..3);
        (
            Just(items.clone()),
            query_near(items.clone()),
            (Just(items), more).prop_flat_map(|(mut a, b)| {
                a.extend(b);
                query_near(a)
            }),
            query(),
        )
    });
    run_suite(cases, 1, strategy, |(items, c, d, e)| {
        let s = store_of(&items);
        let model = Model::new(&items);
        prop_assert_eq!(s.entails(&c), model.entails(&c), "store {:?} query {}", items, c);
        if s.entails(&c) {
            let bigger = s.tell_merge(&e).unwrap();
            prop_assert!(bigger.entails(&c), "monotonicity: {} lost after telling {}", c, e);
        }
        let sc = s.tell_merge(&c).unwrap();
        prop_assert!(sc.entails(&c), "told {} but not entailed", c);
        if s.entails(&c) && sc.entails(&d) {
            prop_assert!(s.entails(&d), "cut: store entails {} and with it {}, but not {}", c, d, d);
        }
        let mut merged = items.clone();
        if flatten_items(&c, &mut merged) {
            prop_assert_eq!(sc.entails(&d), Model::new(&merged).entails(&d), "store {:?} query {}", merged, d);
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Matching

/// Binders `u` or `u, v`; guard atoms are random or store facts with some
/// arguments replaced by binders.
fn guard(items: Vec<Item>) -> impl Strategy<Value = (Vec<String>, Constraint)> {
    let binders = prop_oneof![Just(vec!["u".to_string()]), Just(vec!["u".to_string(), "v".to_string()])];
    let facts: Vec<Atom> =
        items.iter().filter_map(|i| if let Item::Fact(a) = i { Some(a.clone()) } else { None }).collect();
    binders.prop_flat_map(move |bs| {
        let names = bs.clone();
        let bterm = prop_oneof![2 => prop::sample::select(names.clone()).prop_map(Term::var), 1 => ground_term()];
        let random = prop_oneof![
            4 => atom_over(bterm.clone()).prop_map(Constraint::Atom),
            1 => (bterm, ground_term()).prop_map(|(a, b)| Constraint::Eq(a, b)),
        ];
        let lit = if facts.is_empty() {
            random.boxed()
        } else {
            let names = names.clone();
            let lifted = (prop::sample::select(facts.clone()), prop::collection::vec(any::<bool>(), 2), any::<bool>())
                .prop_map(move |(mut a, lift, second)| {
                    for (i, arg) in a.args.iter_mut().enumerate() {
                        if lift[i] {
                            *arg = Term::var(names[usize::from(second && names.len() > 1 && i > 0)].clone());
                        }
                    }
                    Constraint::Atom(a)
                });
            prop_oneof![1 => random, 2 => lifted].boxed()
        };
        (Just(bs), prop::collection::vec(lit, 1..=2).prop_map(Constraint::and))
    })
}

/// Every assignment of the binders over fact arguments (in insertion order)
/// followed by the guard's own constants, kept when the model entails it.
pub fn enumerate_matches(items: &[Item], binders: &[String], guard: &Constraint) -> Vec<Substitution> {
    let model = Model::new(items);
    let mut universe: Vec<Term> = Vec::new();
    let mut add = |t: &Term| {
        if !universe.contains(t) {
            universe.push(t.clone());
        }
    };
    for i in items {
        if let Item::Fact(a) = i {
            a.args.iter().for_each(&mut add);
        }
    }
    guard.normalize().constants().iter().for_each(&mut add);
    let mut out = Vec::new();
    let mut idx = vec![0usize; binders.len()];
    if universe.is_empty() {
        return out;
    }
    loop {
        let terms: Vec<Term> = idx.iter().map(|&i| universe[i].clone()).collect();
        let sigma = Substitution::from_parts(binders, &terms);
        if model.entails(&guard.subst_map(&sigma)) {
            out.push(sigma);
        }
        // Odometer, last binder fastest.
        let mut pos = binders.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < universe.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

pub fn matching_vs_enumeration(cases: u32) -> Result<(), String> {
    let strategy = prop::collection::vec(ground_item(), 0..7)
        .prop_flat_map(|items| (Just(items.clone()), guard(items), prop::collection::vec(any::<bool>(), 8)));
    run_suite(cases, 2, strategy, |(items, (binders, guard), drop)| {
        let store = store_of(&items);
        let all = enumerate_matches(&items, &binders, &guard);
        prop_assert_eq!(match_abstraction(&store, &binders, &guard, &[]), all.clone(), "guard {}", guard);
        let used: Vec<Substitution> = all.iter().zip(&drop).filter(|(_, d)| **d).map(|(s, _)| s.clone()).collect();
        let rest: Vec<Substitution> = all.iter().filter(|s| !used.contains(s)).cloned().collect();
        prop_assert_eq!(match_abstraction(&store, &binders, &guard, &used), rest, "guard {} excluding", guard);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Processes

/// Abstractions only tell predicates further down `p -> q -> r`, so every
/// unit quiesces.
pub fn process() -> impl Strategy<Value = Process> {
    let tell = atom_over(ground_term()).prop_map(|a| Process::tell(Constraint::Atom(a)));
    let abs = prop_oneof![
        ground_term().prop_map(|c| Process::abs(
            vec!["w".into()],
            Constraint::atom("p", vec![Term::var("w")]),
            Process::tell(Constraint::atom("q", vec![Term::var("w"), c])),
        )),
        ground_term().prop_map(|c| Process::abs(
            vec!["w".into(), "w2".into()],
            Constraint::atom("q", vec![Term::var("w"), Term::var("w2")]),
            Process::tell(Constraint::atom("r", vec![Term::var("w2"), c])),
        )),
    ];
    let hidden = Just(Process::local(
        vec!["h".into()],
        Constraint::True,
        Process::tell(Constraint::atom("p", vec![Term::var("h")])),
    ));
    let leaf = prop_oneof![4 => tell, 2 => abs, 1 => hidden, 1 => Just(Process::Skip)];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            2 => prop::collection::vec(inner.clone(), 2..4).prop_map(Process::Par),
            2 => inner.clone().prop_map(Process::next),
            1 => (atom_over(ground_term()), inner.clone())
                .prop_map(|(a, p)| Process::when(Constraint::Atom(a), p)),
            1 => (atom_over(ground_term()), inner.clone())
                .prop_map(|(a, p)| Process::unless(Constraint::Atom(a), p)),
            1 => inner.clone().prop_map(Process::bang),
            1 => (1u32..3, inner.clone()).prop_map(|(n, p)| Process::bang_n(n, p)),
            1 => inner.prop_map(|p| Process::local(vec!["h".into()], Constraint::True, p)),
        ]
    })
}

pub fn run(p: &Process, units: usize) -> Trace {
    Engine::with_budget(100_000).run(p, units, &[]).expect("generated programs quiesce")
}

fn shuffled_par() -> impl Strategy<Value = (Vec<Process>, Vec<Process>)> {
    prop::collection::vec(process(), 2..6).prop_flat_map(|ps| (Just(ps.clone()), Just(ps).prop_shuffle()))
}

pub fn par_permutation_determinacy(cases: u32) -> Result<(), String> {
    run_suite(cases, 3, shuffled_par(), |(ps, qs)| {
        let (a, b) = (run(&Process::Par(ps), 4), run(&Process::Par(qs), 4));
        prop_assert!(obs_equiv(&a, &b).unwrap(), "\n{}\n{}", a.to_jsonl(), b.to_jsonl());
        Ok(())
    })
}

/// `congr_normalize` is idempotent and does not change behaviour;
/// constraint normalization is idempotent.
pub fn normalization_idempotence(cases: u32) -> Result<(), String> {
    run_suite(cases, 4, (process(), query()), |(p, c)| {
        let n = congr_normalize(&p);
        prop_assert_eq!(congr_normalize(&n), n.clone());
        prop_assert!(obs_equiv(&run(&p, 3), &run(&n, 3)).unwrap(), "{} vs {}", p, n);
        let cn = c.normalize();
        prop_assert_eq!(cn.normalize(), cn);
        Ok(())
    })
}

/// A syntactic `<>d` derived from the extracted formula is confirmed by
/// the bounded check over the run.
pub fn eventually_consistency(cases: u32) -> Result<(), String> {
    run_suite(cases, 5, (process(), atom_over(ground_term())), |(p, d)| {
        let d = Constraint::Atom(d);
        if syntactically_eventually(&extract(&p), &d) {
            let trace = run(&p, 8);
            prop_assert!(
                matches!(check_eventually(&trace, &d, None), Verdict::HoldsAt(_)),
                "{} claims <>{} but the run never entails it",
                p,
                d
            );
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Persistent tell and acknowledged wait

/// A predicate of random name and arity with ground arguments.
fn instance() -> impl Strategy<Value = (String, Vec<Term>)> {
    let name = prop::sample::select(vec!["m", "n", "ob", "offer", "pay", "quote"]);
    let arg =
        prop_oneof![(0i64..50).prop_map(Term::int), prop::sample::select(vec!["c", "d", "e"]).prop_map(Term::sym)];
    (name, prop::collection::vec(arg, 1..=3)).prop_map(|(n, args)| (n.to_string(), args))
}

fn binders_for(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn unit_outputs_agree(a: &UnitOutput, b: &UnitOutput) -> bool {
    a.filter_atoms(|p| p != OUT_PRIME).equivalent(&b.filter_atoms(|p| p != OUT_PRIME))
}

/// `waitack` on a guard the input never entails stays put: each unit
/// outputs just the input and leaves a residual equivalent to the start.
pub fn waitack_self_transfer(instances: u32, units: usize) -> Result<(), String> {
    run_suite(instances, 6, instance(), |(pred, args)| {
        let xs = binders_for(args.len());
        let guard = Constraint::atom(&pred, xs.iter().map(Term::var).collect());
        let body = Process::tell(Constraint::atom("done", xs.iter().map(Term::var).collect()));
        let start = Process::wait_ack(xs.clone(), guard, body);
        // Same arguments under another predicate: never an instance of the guard.
        let input = Constraint::atom(format!("{pred}_other"), args.clone());
        let inputs = vec![input.clone(); 3];
        let reference = Engine::with_budget(100_000).run(&start, 3, &inputs).unwrap();
        let expected = UnitOutput::from_store(&Store::new().tell_merge(&input).unwrap());
        let mut engine = Engine::with_budget(100_000);
        let mut current = start.clone();
        for unit in 1..=units {
            let step = engine.observe(&current, &input).unwrap();
            prop_assert!(unit_outputs_agree(&step.unit, &expected), "unit {}: {:?}", unit, step.unit.atom_texts());
            let again = Engine::with_budget(100_000).run(&step.residual, 3, &inputs).unwrap();
            prop_assert!(obs_equiv(&again, &reference).unwrap(), "residual after unit {} differs", unit);
            current = step.residual;
        }
        Ok(())
    })
}

/// `ptell(c(t)) || waitack x; c(x) do next Q` leaves, after one unit, a
/// residual equivalent to `Q[t/x]`.
pub fn ptell_waitack_handshake(instances: u32) -> Result<(), String> {
    run_suite(instances, 7, instance(), |(pred, args)| {
        let xs = binders_for(args.len());
        let vars: Vec<Term> = xs.iter().map(Term::var).collect();
        let q = Process::par([
            Process::tell(Constraint::atom("got", vars.clone())),
            Process::next(Process::tell(Constraint::atom("later", vec![vars[0].clone()]))),
        ]);
        let p = Process::par([
            Process::PTell(Constraint::atom(&pred, args.clone())),
            Process::wait_ack(xs.clone(), Constraint::atom(&pred, vars), Process::next(q.clone())),
        ]);
        let first = Engine::with_budget(100_000).observe(&p, &Constraint::True).unwrap();
        prop_assert!(first.unit.entails(&Constraint::atom(&pred, args.clone())));
        let expected = q.subst(&Substitution::from_parts(&xs, &args));
        let a = Engine::with_budget(100_000).run(&first.residual, 3, &[]).unwrap();
        let b = Engine::with_budget(100_000).run(&expected, 3, &[]).unwrap();
        prop_assert!(obs_equiv(&a, &b).unwrap(), "\n{}\n{}", a.to_jsonl(), b.to_jsonl());
        Ok(())
    })
}
