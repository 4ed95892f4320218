use std::fmt;

use crate::constraint::{Constraint, Store};
use crate::utcc::derived::{expand_derived, unfold_bang_n};
use crate::utcc::Process;

/// First-order linear-time temporal formulas over constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    True,
    Atom(Constraint),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Vec<String>, Box<Formula>),
    Exists(Vec<String>, Box<Formula>),
    Next(Box<Formula>),
    Always(Box<Formula>),
    /// Kept explicit for output; stands for `~[]~F`.
    Eventually(Box<Formula>),
}

impl Formula {
    fn and(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::And(ps) => out.extend(ps),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    fn constraint(c: &Constraint) -> Formula {
        match c {
            Constraint::True => Formula::True,
            c => Formula::Atom(c.clone()),
        }
    }
}

/// The logical reading of a process. Derived forms are expanded first.
pub fn extract(p: &Process) -> Formula {
    go(&expand_derived(p))
}

fn go(p: &Process) -> Formula {
    match p {
        Process::Skip => Formula::True,
        Process::Tell(c) => Formula::constraint(c),
        Process::Par(ps) => Formula::and(ps.iter().map(go).collect()),
        Process::Abs { binders, guard, body, .. } => Formula::Forall(
            binders.clone(),
            Box::new(Formula::Implies(Box::new(Formula::constraint(guard)), Box::new(go(body)))),
        ),
        Process::Local { vars, init, body } => {
            Formula::Exists(vars.clone(), Box::new(Formula::and(vec![Formula::constraint(init), go(body)])))
        }
        Process::Next(q) => Formula::Next(Box::new(go(q))),
        Process::Unless { guard, body } => {
            Formula::Or(vec![Formula::constraint(guard), Formula::Next(Box::new(go(body)))])
        }
        Process::Bang(q) => Formula::Always(Box::new(go(q))),
        Process::BangN(n, q) => go(&unfold_bang_n(*n, q)),
        Process::PTell(_) | Process::Wait { .. } | Process::WaitAck { .. } => go(&expand_derived(p)),
    }
}

/// Sufficient syntactic condition for `F ⊢ <>d`: some constraint that `F`
/// forces at a definite future position entails `d`. Never claims more than
/// holds; a `false` answer says nothing.
pub fn syntactically_eventually(f: &Formula, d: &Constraint) -> bool {
    match f {
        Formula::True => matches!(d, Constraint::True),
        Formula::Atom(c) => {
            let mut s = Store::new();
            s.tell(c).is_ok() && s.entails(d)
        }
        Formula::And(ps) => ps.iter().any(|p| syntactically_eventually(p, d)),
        Formula::Or(ps) => !ps.is_empty() && ps.iter().all(|p| syntactically_eventually(p, d)),
        Formula::Exists(_, b) | Formula::Next(b) | Formula::Always(b) | Formula::Eventually(b) => {
            syntactically_eventually(b, d)
        }
        Formula::Not(_) | Formula::Implies(..) | Formula::Forall(..) => false,
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, ps: &[Formula], sep: &str| -> fmt::Result {
            f.write_str("(")?;
            for (i, p) in ps.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write!(f, "{p}")?;
            }
            f.write_str(")")
        };
        match self {
            Formula::True => f.write_str("true"),
            Formula::Atom(c) => write!(f, "{c}"),
            Formula::And(ps) => join(f, ps, " /\\ "),
            Formula::Or(ps) => join(f, ps, " \\/ "),
            Formula::Not(p) => write!(f, "~{p}"),
            Formula::Implies(a, b) => write!(f, "({a} => {b})"),
            Formula::Forall(xs, b) => write!(f, "forall {}. {b}", xs.join(", ")),
            Formula::Exists(xs, b) => write!(f, "exists {}. {b}", xs.join(", ")),
            Formula::Next(p) => write!(f, "o {p}"),
            Formula::Always(p) => write!(f, "[] {p}"),
            Formula::Eventually(p) => write!(f, "<> {p}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::parse_constraint;
    use crate::utcc::parse_process;

    fn x(src: &str) -> String {
        extract(&parse_process(src).unwrap()).to_string()
    }

    #[test]
    fn equations() {
        assert_eq!(x("skip"), "true");
        assert_eq!(x("!tell(c)"), "[] c");
        assert_eq!(x("(abs x; c(x)) tell(d(x))"), "forall x. (c(x) => d(x))");
        assert_eq!(x("(local x; c(x)) tell(d(x))"), "exists x. (c(x) /\\ d(x))");
        assert_eq!(x("unless c next tell(d)"), "(c \\/ o d)");
        assert_eq!(x("tell(a) || next tell(b)"), "(a /\\ o b)");
        assert_eq!(x("![2] tell(a)"), "(a /\\ o a)");
    }

    #[test]
    fn par_is_conjunction() {
        let (p, q) = (parse_process("!tell(a)").unwrap(), parse_process("next tell(b)").unwrap());
        assert_eq!(extract(&Process::par(vec![p.clone(), q.clone()])), Formula::And(vec![extract(&p), extract(&q)]));
    }

    #[test]
    fn syntactic_check_is_conservative() {
        let d = parse_constraint("a", &[]).unwrap();
        let yes = extract(&parse_process("next !tell(a & b)").unwrap());
        assert!(syntactically_eventually(&yes, &d));
        let guarded = extract(&parse_process("when c do tell(a)").unwrap());
        assert!(!syntactically_eventually(&guarded, &d));
        let either = extract(&parse_process("unless a next tell(a)").unwrap());
        assert!(syntactically_eventually(&either, &d));
        let hidden = extract(&parse_process("(local k) tell(acc(s, k))").unwrap());
        assert!(syntactically_eventually(&hidden, &parse_constraint("exists k. acc(s, k)", &[]).unwrap()));
    }
}
