use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Ground constant: names, integers and booleans.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Sym(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

/// Built-in operators. Ground applications are evaluated away before a
/// constraint reaches the store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Neg,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Not,
    Field(String),
}

impl Op {
    pub fn infix(&self) -> Option<&'static str> {
        Some(match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Eq => "==",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::And => "and",
            Op::Or => "or",
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(Value),
    Tuple(Vec<Term>),
    Apply(Op, Vec<Term>),
}

impl Term {
    pub fn var(s: impl Into<String>) -> Term {
        Term::Var(s.into())
    }

    pub fn sym(s: impl Into<String>) -> Term {
        Term::Const(Value::Sym(s.into()))
    }

    pub fn int(n: i64) -> Term {
        Term::Const(Value::Int(n))
    }

    pub fn bool(b: bool) -> Term {
        Term::Const(Value::Bool(b))
    }

    pub fn apply(op: Op, args: Vec<Term>) -> Term {
        Term::Apply(op, args)
    }

    /// Record literal: a tuple of `<field, value>` pairs.
    pub fn record(fields: Vec<(String, Term)>) -> Term {
        Term::Tuple(fields.into_iter().map(|(k, v)| Term::Tuple(vec![Term::sym(k), v])).collect())
    }

    pub fn as_const(&self) -> Option<&Value> {
        match self {
            Term::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) => true,
            Term::Tuple(ts) | Term::Apply(_, ts) => ts.iter().all(Term::is_ground),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) => {}
            Term::Tuple(ts) | Term::Apply(_, ts) => ts.iter().for_each(|t| t.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Term::Var(v) => v == name,
            Term::Const(_) => false,
            Term::Tuple(ts) | Term::Apply(_, ts) => ts.iter().any(|t| t.mentions(name)),
        }
    }

    pub fn subst(&self, f: &dyn Fn(&str) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Term::Const(_) => self.clone(),
            Term::Tuple(ts) => Term::Tuple(ts.iter().map(|t| t.subst(f)).collect()),
            Term::Apply(op, ts) => Term::Apply(op.clone(), ts.iter().map(|t| t.subst(f)).collect()),
        }
    }

    pub fn rename(&self, from: &str, to: &str) -> Term {
        self.subst(&|v| (v == from).then(|| Term::var(to)))
    }

    /// Evaluates every ground operator application bottom-up. Applications
    /// that are not ground, or that fail to type-check, are kept symbolic.
    pub fn normalize(&self) -> Term {
        match self {
            Term::Var(_) | Term::Const(_) => self.clone(),
            Term::Tuple(ts) => Term::Tuple(ts.iter().map(Term::normalize).collect()),
            Term::Apply(op, ts) => {
                let args: Vec<Term> = ts.iter().map(Term::normalize).collect();
                match apply_op(op, &args) {
                    Ok(Some(t)) => t,
                    _ => Term::Apply(op.clone(), args),
                }
            }
        }
    }

    /// Fully evaluates a term that must be ground.
    pub fn eval(&self) -> Result<Term, EvalError> {
        match self {
            Term::Var(v) => Err(EvalError::Unbound(v.clone())),
            Term::Const(_) => Ok(self.clone()),
            Term::Tuple(ts) => Ok(Term::Tuple(ts.iter().map(Term::eval).collect::<Result<_, _>>()?)),
            Term::Apply(op, ts) => {
                let args = ts.iter().map(Term::eval).collect::<Result<Vec<_>, _>>()?;
                apply_op(op, &args)?.ok_or_else(|| EvalError::Type(format!("cannot evaluate {self}")))
            }
        }
    }

    /// Subterms in pre-order, the term itself first.
    pub fn subterms<'a>(&'a self, out: &mut Vec<&'a Term>) {
        out.push(self);
        if let Term::Tuple(ts) | Term::Apply(_, ts) = self {
            ts.iter().for_each(|t| t.subterms(out));
        }
    }
}

fn int(t: &Term, op: &Op) -> Result<i64, EvalError> {
    match t {
        Term::Const(Value::Int(n)) => Ok(*n),
        other => Err(EvalError::Type(format!("`{}` expects integers, got {other}", op_name(op)))),
    }
}

fn boolean(t: &Term, op: &Op) -> Result<bool, EvalError> {
    match t {
        Term::Const(Value::Bool(b)) => Ok(*b),
        other => Err(EvalError::Type(format!("`{}` expects booleans, got {other}", op_name(op)))),
    }
}

fn op_name(op: &Op) -> String {
    match op {
        Op::Neg => "-".into(),
        Op::Not => "not".into(),
        Op::Field(f) => format!(".{f}"),
        other => other.infix().unwrap_or("?").into(),
    }
}

/// `Ok(None)` when some argument is not yet ground.
fn apply_op(op: &Op, args: &[Term]) -> Result<Option<Term>, EvalError> {
    if let Op::Field(name) = op {
        return match &args[0] {
            Term::Tuple(items) => items
                .iter()
                .find_map(|it| match it {
                    Term::Tuple(kv) if kv.len() == 2 && kv[0] == Term::sym(name.clone()) => Some(kv[1].clone()),
                    _ => None,
                })
                .map(Some)
                .ok_or_else(|| EvalError::Type(format!("record has no field `{name}`"))),
            t if t.is_ground() => Err(EvalError::Type(format!("field access on non-record {t}"))),
            _ => Ok(None),
        };
    }
    if !args.iter().all(|a| matches!(a, Term::Const(_)) || (a.is_ground() && matches!(op, Op::Eq | Op::Ne))) {
        return Ok(None);
    }
    let v = match op {
        Op::Add => Term::int(int(&args[0], op)?.wrapping_add(int(&args[1], op)?)),
        Op::Sub => Term::int(int(&args[0], op)?.wrapping_sub(int(&args[1], op)?)),
        Op::Mul => Term::int(int(&args[0], op)?.wrapping_mul(int(&args[1], op)?)),
        Op::Neg => Term::int(int(&args[0], op)?.wrapping_neg()),
        Op::Lt => Term::bool(int(&args[0], op)? < int(&args[1], op)?),
        Op::Le => Term::bool(int(&args[0], op)? <= int(&args[1], op)?),
        Op::Gt => Term::bool(int(&args[0], op)? > int(&args[1], op)?),
        Op::Ge => Term::bool(int(&args[0], op)? >= int(&args[1], op)?),
        Op::And => Term::bool(boolean(&args[0], op)? && boolean(&args[1], op)?),
        Op::Or => Term::bool(boolean(&args[0], op)? || boolean(&args[1], op)?),
        Op::Not => Term::bool(!boolean(&args[0], op)?),
        Op::Eq | Op::Ne => {
            let (a, b) = (&args[0], &args[1]);
            if let (Term::Const(x), Term::Const(y)) = (a, b) {
                if std::mem::discriminant(x) != std::mem::discriminant(y) {
                    return Err(EvalError::Type(format!("cannot compare {a} with {b}")));
                }
            }
            Term::bool((a == b) == (*op == Op::Eq))
        }
        Op::Field(_) => unreachable!(),
    };
    Ok(Some(v))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
            Term::Tuple(ts) => {
                f.write_str("<")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(">")
            }
            Term::Apply(Op::Field(name), ts) => write!(f, "{}.{name}", Paren(&ts[0])),
            Term::Apply(Op::Not, ts) => write!(f, "not {}", Paren(&ts[0])),
            Term::Apply(Op::Neg, ts) => write!(f, "-{}", Paren(&ts[0])),
            Term::Apply(op, ts) => write!(f, "({} {} {})", ts[0], op.infix().unwrap_or("?"), ts[1]),
        }
    }
}

/// Prints prefix/postfix operands with parentheses unless atomic.
struct Paren<'a>(&'a Term);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Term::Apply(op, _) if op.infix().is_none() => write!(f, "({})", self.0),
            t => write!(f, "{t}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_arithmetic_normalizes() {
        let t = Term::apply(Op::Add, vec![Term::int(2), Term::int(1)]);
        assert_eq!(t.normalize(), Term::int(3));
        let open = Term::apply(Op::Add, vec![Term::var("x"), Term::int(1)]);
        assert_eq!(open.normalize(), open);
    }

    #[test]
    fn record_field_access() {
        let rec = Term::record(vec![("price".into(), Term::int(1500))]);
        let le = Term::apply(Op::Le, vec![Term::apply(Op::Field("price".into()), vec![rec]), Term::int(1500)]);
        assert_eq!(le.eval().unwrap(), Term::bool(true));
    }

    #[test]
    fn comparing_bool_with_int_is_type_error() {
        let t = Term::apply(Op::Eq, vec![Term::bool(true), Term::int(1)]);
        assert!(matches!(t.eval(), Err(EvalError::Type(_))));
    }
}
