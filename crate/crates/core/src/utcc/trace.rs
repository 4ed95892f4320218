//! Per-unit outputs, their line-delimited JSON form, and observable
//! equivalence.

use serde::{Deserialize, Serialize};

use crate::constraint::{is_generated, parse_constraint, Atom, Constraint, Store, Term};
use crate::error::TraceError;

use super::derived::OUT_PRIME;
use super::process::Process;

/// The quiescent store of one time unit. Generated names (`hint#n`) are
/// existentially quantified.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnitOutput {
    /// Sorted by canonical text, without duplicates.
    pub atoms: Vec<Atom>,
    pub equalities: Vec<(Term, Term)>,
    pub disequalities: Vec<(Term, Term)>,
    pub inconsistent: bool,
}

impl UnitOutput {
    pub fn new(
        atoms: Vec<Atom>,
        equalities: Vec<(Term, Term)>,
        disequalities: Vec<(Term, Term)>,
        inconsistent: bool,
    ) -> Self {
        let mut atoms: Vec<(String, Atom)> = atoms.into_iter().map(|a| (a.to_string(), a)).collect();
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        atoms.dedup_by(|a, b| a.0 == b.0);
        UnitOutput { atoms: atoms.into_iter().map(|(_, a)| a).collect(), equalities, disequalities, inconsistent }
    }

    pub fn from_store(store: &Store) -> Self {
        UnitOutput::new(
            store.facts().to_vec(),
            store.equalities().to_vec(),
            store.disequalities().to_vec(),
            store.is_inconsistent(),
        )
    }

    pub fn atom_texts(&self) -> Vec<String> {
        self.atoms.iter().map(Atom::to_string).collect()
    }

    /// Conjunction of everything in the unit, generated names still free.
    pub fn body(&self) -> Constraint {
        if self.inconsistent {
            return Constraint::False;
        }
        Constraint::and(
            self.atoms
                .iter()
                .cloned()
                .map(Constraint::Atom)
                .chain(self.equalities.iter().map(|(a, b)| Constraint::Eq(a.clone(), b.clone())))
                .chain(self.disequalities.iter().map(|(a, b)| Constraint::Neq(a.clone(), b.clone()))),
        )
    }

    /// The unit as a closed constraint: generated names quantified.
    pub fn to_constraint(&self) -> Constraint {
        let body = self.body();
        let hidden: Vec<String> = body.free_vars().into_iter().filter(|v| is_generated(v)).collect();
        Constraint::exists(hidden, body)
    }

    /// A store holding the unit's content, generated names as rigid terms.
    pub fn store(&self) -> Store {
        let mut s = Store::new();
        // Content came out of a store, so arities are already consistent.
        let _ = s.tell(&self.body());
        s
    }

    pub fn entails(&self, c: &Constraint) -> bool {
        self.store().entails(c)
    }

    /// Keeps only atoms whose predicate satisfies `keep`.
    pub fn filter_atoms(&self, keep: impl Fn(&str) -> bool) -> UnitOutput {
        UnitOutput {
            atoms: self.atoms.iter().filter(|a| keep(&a.pred)).cloned().collect(),
            equalities: self.equalities.clone(),
            disequalities: self.disequalities.clone(),
            inconsistent: self.inconsistent,
        }
    }

    /// Mutual entailment, generated names on either side read existentially.
    pub fn equivalent(&self, other: &UnitOutput) -> bool {
        self.store().entails(&other.to_constraint()) && other.store().entails(&self.to_constraint())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub outputs: Vec<UnitOutput>,
    /// Residual process after each unit, when requested.
    pub residuals: Vec<Process>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    unit_index: usize,
    atoms: Vec<String>,
    equalities: Vec<String>,
    inconsistent_flag: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    disequalities: Vec<String>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// One JSON object per line, units numbered from 1.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, u) in self.outputs.iter().enumerate() {
            let rec = Record {
                unit_index: i + 1,
                atoms: u.atom_texts(),
                equalities: u.equalities.iter().map(|(a, b)| format!("{a} = {b}")).collect(),
                inconsistent_flag: u.inconsistent,
                disequalities: u.disequalities.iter().map(|(a, b)| format!("{a} != {b}")).collect(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("records always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(src: &str) -> Result<Trace, TraceError> {
        let mut outputs = Vec::new();
        for (n, line) in src.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |msg: String| TraceError::Malformed { line: n + 1, msg };
            let rec: Record = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            if rec.unit_index != outputs.len() + 1 {
                return Err(bad(format!("expected unit {}, found {}", outputs.len() + 1, rec.unit_index)));
            }
            let parse = |s: &str| parse_constraint(s, &[]).map_err(|e| bad(format!("`{s}`: {e}")));
            let mut atoms = Vec::new();
            for a in &rec.atoms {
                match parse(a)? {
                    Constraint::Atom(a) => atoms.push(a),
                    other => return Err(bad(format!("`{other}` is not an atom"))),
                }
            }
            let pairs = |items: &[String], want_eq: bool| -> Result<Vec<(Term, Term)>, TraceError> {
                items
                    .iter()
                    .map(|s| match (parse(s)?, want_eq) {
                        (Constraint::Eq(a, b), true) | (Constraint::Neq(a, b), false) => Ok((a, b)),
                        (other, _) => Err(bad(format!(
                            "`{other}` is not an {}",
                            if want_eq { "equality" } else { "disequality" }
                        ))),
                    })
                    .collect()
            };
            let equalities = pairs(&rec.equalities, true)?;
            let disequalities = pairs(&rec.disequalities, false)?;
            outputs.push(UnitOutput::new(atoms, equalities, disequalities, rec.inconsistent_flag));
        }
        Ok(Trace { outputs, residuals: Vec::new() })
    }

    /// Drops atoms of the named predicates from every unit.
    pub fn erase(&self, preds: &dyn Fn(&str) -> bool) -> Trace {
        Trace { outputs: self.outputs.iter().map(|u| u.filter_atoms(|p| !preds(p))).collect(), residuals: Vec::new() }
    }
}

/// Unit-wise equivalence after discarding the go/stop handshake atoms.
pub fn obs_equiv(t1: &Trace, t2: &Trace) -> Result<bool, TraceError> {
    if t1.len() != t2.len() {
        return Err(TraceError::LengthMismatch(t1.len(), t2.len()));
    }
    Ok(first_divergence(t1, t2).is_none())
}

/// 1-based index of the first unit where the erased outputs differ.
pub fn first_divergence(t1: &Trace, t2: &Trace) -> Option<usize> {
    let erase = |p: &str| p == OUT_PRIME;
    let (a, b) = (t1.erase(&erase), t2.erase(&erase));
    a.outputs.iter().zip(&b.outputs).position(|(x, y)| !x.equivalent(y)).map(|i| i + 1)
}
