//! Expression evaluation and normal forms `def D in ν u⃗ (Q1 | … | Qn)`.

use std::collections::HashMap;
use std::fmt;

use super::ast::{Decl, HvkProcess, Subst};
use crate::constraint::{is_generated, Fresh, Term};
use crate::error::{EvalError, HvkError};

/// Unfoldings allowed while normalizing before recursion counts as unguarded.
pub const UNFOLD_LIMIT: usize = 1000;

/// Evaluates a closed expression. Generated names are values.
pub fn eval_expr(e: &Term, env: &HashMap<String, Term>) -> Result<Term, EvalError> {
    let closed = e.subst(&|v| env.get(v).cloned());
    value(&closed)
}

fn value(t: &Term) -> Result<Term, EvalError> {
    match t {
        Term::Var(v) if is_generated(v) => Ok(t.clone()),
        Term::Var(v) => Err(EvalError::Unbound(v.clone())),
        Term::Const(_) => Ok(t.clone()),
        Term::Tuple(ts) => Ok(Term::Tuple(ts.iter().map(value).collect::<Result<_, _>>()?)),
        Term::Apply(op, ts) => {
            let args = ts.iter().map(value).collect::<Result<Vec<_>, _>>()?;
            Term::Apply(op.clone(), args).eval()
        }
    }
}

pub fn eval_bool(e: &Term) -> Result<bool, EvalError> {
    match value(e)? {
        Term::Const(crate::constraint::Value::Bool(b)) => Ok(b),
        other => Err(EvalError::Type(format!("condition `{e}` evaluated to {other}, not a boolean"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalForm {
    pub decls: Vec<Decl>,
    /// Restricted names, all generated.
    pub names: Vec<String>,
    /// No `|`, `new`, `def` or process call at the top of any thread.
    pub threads: Vec<HvkProcess>,
}

impl NormalForm {
    pub fn to_process(&self) -> HvkProcess {
        let mut p = HvkProcess::par(self.threads.iter().cloned());
        if !self.names.is_empty() {
            p = HvkProcess::New { names: self.names.clone(), body: Box::new(p) };
        }
        if !self.decls.is_empty() {
            p = HvkProcess::Def { decls: self.decls.clone(), body: Box::new(p) };
        }
        p
    }

    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == name)
    }

    /// Adds `p` as new top-level threads, lifting restrictions and
    /// declarations and unfolding calls. Returns the number of unfoldings.
    pub fn absorb(&mut self, p: HvkProcess, fresh: &mut Fresh) -> Result<usize, HvkError> {
        let mut unfolded = 0;
        self.collect(p, fresh, &mut unfolded)?;
        Ok(unfolded)
    }

    fn collect(&mut self, p: HvkProcess, fresh: &mut Fresh, unfolded: &mut usize) -> Result<(), HvkError> {
        // Explicit stack, popped in source order; `depth` counts unfoldings
        // since the last prefix.
        let mut stack = vec![(p, 0usize)];
        while let Some((p, depth)) = stack.pop() {
            match p {
                HvkProcess::Inact => {}
                HvkProcess::Par(ps) => stack.extend(ps.into_iter().rev().map(|q| (q, depth))),
                HvkProcess::New { names, body } => {
                    let mut s = Subst::default();
                    for n in &names {
                        let f = fresh.var(n);
                        s.data.insert(n.clone(), Term::var(f.clone()));
                        s.chans.insert(n.clone(), f.clone());
                        self.names.push(f);
                    }
                    stack.push((body.subst(&s), depth));
                }
                HvkProcess::Def { decls, body } => {
                    for d in decls {
                        match self.decl(&d.name) {
                            Some(existing) if *existing == d => {}
                            Some(_) => {
                                return Err(HvkError::IllFormed(format!(
                                    "process variable `{}` declared twice",
                                    d.name
                                )))
                            }
                            None => self.decls.push(d),
                        }
                    }
                    stack.push((*body, depth));
                }
                HvkProcess::Call { name, args, chans } => {
                    if depth >= UNFOLD_LIMIT {
                        return Err(HvkError::UnguardedRecursion(UNFOLD_LIMIT));
                    }
                    let d = self.decl(&name).ok_or_else(|| HvkError::UnboundProcessVar(name.clone()))?.clone();
                    if d.params.len() != args.len() || d.chans.len() != chans.len() {
                        return Err(HvkError::CallArity {
                            name,
                            expected: d.params.len() + d.chans.len(),
                            found: args.len() + chans.len(),
                        });
                    }
                    let mut s = Subst::default();
                    for (x, e) in d.params.iter().zip(&args) {
                        s.data.insert(x.clone(), eval_expr(e, &HashMap::new())?);
                    }
                    for (k, c) in d.chans.iter().zip(chans) {
                        s.chans.insert(k.clone(), c);
                    }
                    *unfolded += 1;
                    stack.push((d.body.subst(&s), depth + 1));
                }
                other => self.threads.push(other),
            }
        }
        Ok(())
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_process())
    }
}

/// Lifts every top-level restriction and declaration, flattens parallel
/// composition and unfolds top-level calls.
pub fn normal_form(p: &HvkProcess, fresh: &mut Fresh) -> Result<NormalForm, HvkError> {
    if let Some(x) = p.free_proc_vars().into_iter().next() {
        return Err(HvkError::UnboundProcessVar(x));
    }
    let mut nf = NormalForm::default();
    nf.absorb(p.clone(), fresh)?;
    Ok(nf)
}
