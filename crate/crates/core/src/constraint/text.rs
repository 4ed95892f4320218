//! Concrete syntax for constraints and terms.
//!
//! Identifiers are variables when bound by an enclosing binder or when they
//! carry a generated-name marker (`#`, `$`); every other identifier is a name
//! constant.

use super::formula::{Atom, Constraint};
use super::term::{Op, Term, Value};
use crate::error::SyntaxError;
use crate::lexer::{tokenize, Cursor, Dialect, Tok};

pub const KEYWORDS: &[&str] = &[
    "next",
    "do",
    "excluding",
    "except",
    "exists",
    "true",
    "false",
    "holds",
    "skip",
    "tell",
    "abs",
    "local",
    "unless",
    "when",
    "wait",
    "waitack",
    "whenever",
    "ptell",
    "not",
    "and",
    "or",
];

pub fn parse_constraint(src: &str, scope: &[String]) -> Result<Constraint, SyntaxError> {
    let mut cur = Cursor::new(tokenize(src, Dialect::Generated)?);
    let mut scope = scope.to_vec();
    let c = constraint(&mut cur, &mut scope)?;
    if !cur.at_eof() {
        return Err(cur.unexpected("end of constraint"));
    }
    Ok(c)
}

pub fn parse_term(src: &str, scope: &[String]) -> Result<Term, SyntaxError> {
    let mut cur = Cursor::new(tokenize(src, Dialect::Generated)?);
    let t = term(&mut cur, scope)?;
    if !cur.at_eof() {
        return Err(cur.unexpected("end of term"));
    }
    Ok(t)
}

/// Conjunction of literals separated by `&`.
pub fn constraint(cur: &mut Cursor, scope: &mut Vec<String>) -> Result<Constraint, SyntaxError> {
    let mut parts = vec![literal(cur, scope)?];
    while cur.eat_sym("&") {
        parts.push(literal(cur, scope)?);
    }
    Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Constraint::And(parts) })
}

fn literal(cur: &mut Cursor, scope: &mut Vec<String>) -> Result<Constraint, SyntaxError> {
    if cur.eat_kw("true") {
        return Ok(Constraint::True);
    }
    if cur.eat_kw("false") {
        return Ok(Constraint::False);
    }
    if cur.eat_kw("exists") {
        let mut vars = vec![cur.ident()?];
        while cur.eat_sym(",") {
            vars.push(cur.ident()?);
        }
        cur.expect_sym(".")?;
        let depth = scope.len();
        scope.extend(vars.iter().cloned());
        let body = constraint(cur, scope);
        scope.truncate(depth);
        return Ok(Constraint::Exists(vars, Box::new(body?)));
    }
    if cur.is_kw("holds") && matches!(cur.peek_at(1), Tok::Sym("(")) {
        cur.bump();
        cur.bump();
        let t = term(cur, scope)?;
        cur.expect_sym(")")?;
        return Ok(Constraint::Holds(t));
    }
    if cur.is_sym("(") {
        let save = cur.pos;
        cur.bump();
        if let Ok(c) = constraint(cur, scope) {
            if cur.eat_sym(")") && !is_relation(cur.peek()) && !is_term_continuation(cur.peek()) {
                return Ok(c);
            }
        }
        cur.pos = save;
    }
    if let Tok::Ident(name) = cur.peek().clone() {
        if !KEYWORDS.contains(&name.as_str()) && !scope.contains(&name) && !name.contains(['#', '$']) {
            if matches!(cur.peek_at(1), Tok::Sym("(")) {
                cur.bump();
                cur.bump();
                let mut args = Vec::new();
                if !cur.is_sym(")") {
                    args.push(term(cur, scope)?);
                    while cur.eat_sym(",") {
                        args.push(term(cur, scope)?);
                    }
                }
                cur.expect_sym(")")?;
                return Ok(Constraint::Atom(Atom::new(name, args)));
            }
            if !is_relation(cur.peek_at(1)) && !is_term_continuation(cur.peek_at(1)) {
                cur.bump();
                return Ok(Constraint::atom(name, vec![]));
            }
        }
    }
    let lhs = additive(cur, scope)?;
    let rel = match cur.peek() {
        Tok::Sym(s) if is_relation(cur.peek()) => *s,
        _ => return Err(cur.unexpected("a relation (`=`, `!=`, `<`, ...)")),
    };
    cur.bump();
    let rhs = additive(cur, scope)?;
    Ok(match rel {
        "=" => Constraint::Eq(lhs, rhs),
        "!=" => Constraint::Neq(lhs, rhs),
        "==" => Constraint::Holds(Term::apply(Op::Eq, vec![lhs, rhs])),
        "<" => Constraint::Holds(Term::apply(Op::Lt, vec![lhs, rhs])),
        "<=" => Constraint::Holds(Term::apply(Op::Le, vec![lhs, rhs])),
        ">" => Constraint::Holds(Term::apply(Op::Gt, vec![lhs, rhs])),
        _ => Constraint::Holds(Term::apply(Op::Ge, vec![lhs, rhs])),
    })
}

fn is_relation(t: &Tok) -> bool {
    matches!(t, Tok::Sym("=" | "!=" | "==" | "<" | "<=" | ">" | ">="))
}

fn is_term_continuation(t: &Tok) -> bool {
    matches!(t, Tok::Sym("+" | "-" | "*" | "."))
}

/// Full term grammar: `or` < `and` < comparisons < `+ -` < `*` < prefix < postfix.
pub fn term(cur: &mut Cursor, scope: &[String]) -> Result<Term, SyntaxError> {
    let mut lhs = conj(cur, scope)?;
    while cur.eat_kw("or") {
        let rhs = conj(cur, scope)?;
        lhs = Term::apply(Op::Or, vec![lhs, rhs]);
    }
    Ok(lhs)
}

fn conj(cur: &mut Cursor, scope: &[String]) -> Result<Term, SyntaxError> {
    let mut lhs = comparison(cur, scope)?;
    while cur.eat_kw("and") {
        let rhs = comparison(cur, scope)?;
        lhs = Term::apply(Op::And, vec![lhs, rhs]);
    }
    Ok(lhs)
}

fn comparison(cur: &mut Cursor, scope: &[String]) -> Result<Term, SyntaxError> {
    let lhs = additive(cur, scope)?;
    let op = match cur.peek() {
        Tok::Sym("==") | Tok::Sym("=") => Op::Eq,
        Tok::Sym("!=") => Op::Ne,
        Tok::Sym("<") => Op::Lt,
        Tok::Sym("<=") => Op::Le,
        Tok::Sym(">") => Op::Gt,
        Tok::Sym(">=") => Op::Ge,
        _ => return Ok(lhs),
    };
    cur.bump();
    let rhs = additive(cur, scope)?;
    Ok(Term::apply(op, vec![lhs, rhs]))
}

/// Terms without comparisons or boolean connectives (tuple elements, sides
/// of a relation literal).
pub fn additive(cur: &mut Cursor, scope: &[String]) -> Result<Term, SyntaxError> {
    let mut lhs = product(cur, scope)?;
    loop {
        let op = if cur.eat_sym("+") {
            Op::Add
        } else if cur.eat_sym("-") {
            Op::Sub
        } else {
            return Ok(lhs);
        };
        let rhs = product(cur, scope)?;
        lhs = Term::apply(op, vec![lhs, rhs]);
    }
}

fn product(cur: &mut Cursor, scope: &[String]) -> Result<Term, SyntaxError> {
    let mut lhs = prefix(cur, scope)?;
    while cur.eat_sym("*") {
        let rhs = prefix(cur, scope)?;
        lhs = Term::apply(Op::Mul, vec![lhs, rhs]);
    }
    Ok(lhs)
}

fn prefix(cur: &mut Cursor, scope: &[String]) -> Result<Term, SyntaxError> {
    if cur.eat_kw("not") {
        return Ok(Term::apply(Op::Not, vec![prefix(cur, scope)?]));
    }
    if cur.eat_sym("-") {
        return Ok(match prefix(cur, scope)? {
            Term::Const(Value::Int(n)) => Term::int(n.wrapping_neg()),
            t => Term::apply(Op::Neg, vec![t]),
        });
    }
    postfix(cur, scope)
}

fn postfix(cur: &mut Cursor, scope: &[String]) -> Result<Term, SyntaxError> {
    let mut t = primary(cur, scope)?;
    while cur.eat_sym(".") {
        let f = cur.ident()?;
        t = Term::apply(Op::Field(f), vec![t]);
    }
    Ok(t)
}

fn primary(cur: &mut Cursor, scope: &[String]) -> Result<Term, SyntaxError> {
    match cur.peek().clone() {
        Tok::Int(n) => {
            cur.bump();
            Ok(Term::int(n))
        }
        Tok::Ident(s) if s == "true" || s == "false" => {
            cur.bump();
            Ok(Term::bool(s == "true"))
        }
        Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
            cur.bump();
            Ok(name_term(s, scope))
        }
        Tok::Sym("(") => {
            cur.bump();
            let t = term(cur, scope)?;
            cur.expect_sym(")")?;
            Ok(t)
        }
        Tok::Sym("<") => {
            cur.bump();
            let mut items = Vec::new();
            if !cur.is_sym(">") {
                items.push(additive(cur, scope)?);
                while cur.eat_sym(",") {
                    items.push(additive(cur, scope)?);
                }
            }
            cur.expect_sym(">")?;
            Ok(Term::Tuple(items))
        }
        Tok::Sym("{") => {
            cur.bump();
            let mut fields = Vec::new();
            if !cur.is_sym("}") {
                loop {
                    let f = cur.ident()?;
                    cur.expect_sym(":")?;
                    fields.push((f, term(cur, scope)?));
                    if !cur.eat_sym(",") {
                        break;
                    }
                }
            }
            cur.expect_sym("}")?;
            Ok(Term::record(fields))
        }
        _ => Err(cur.unexpected("a term")),
    }
}

pub fn name_term(s: String, scope: &[String]) -> Term {
    if scope.contains(&s) || s.contains(['#', '$']) {
        Term::Var(s)
    } else {
        Term::sym(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(src: &str, scope: &[&str]) {
        let scope: Vec<String> = scope.iter().map(|s| s.to_string()).collect();
        let c = parse_constraint(src, &scope).unwrap();
        let again = parse_constraint(&c.to_string(), &scope).unwrap();
        assert_eq!(c, again, "{src} -> {c}");
    }

    #[test]
    fn parses_atoms_and_binders() {
        let c = parse_constraint("exists k. out(k, 0) & acc(b, k)", &[]).unwrap();
        let Constraint::Exists(vs, body) = c else { panic!() };
        assert_eq!(vs, vec!["k".to_string()]);
        assert_eq!(
            *body,
            Constraint::And(vec![
                Constraint::atom("out", vec![Term::var("k"), Term::int(0)]),
                Constraint::atom("acc", vec![Term::sym("b"), Term::var("k")]),
            ])
        );
    }

    #[test]
    fn round_trips() {
        rt("out'(go#3) & x = 5 & y != <a, -2>", &["x", "y"]);
        rt("holds((m <= 300)) & req(a, k#1, m)", &["m"]);
        rt("stop & (exists v. p(v)) & q", &[]);
        rt("holds(not (x.price > 1000))", &["x"]);
        rt("out(k, {price: 1200})", &[]);
    }

    #[test]
    fn relation_sugar_becomes_holds() {
        let c = parse_constraint("m <= 300", &["m".into()]).unwrap();
        assert_eq!(c, Constraint::Holds(Term::apply(Op::Le, vec![Term::var("m"), Term::int(300)])));
    }

    #[test]
    fn parenthesized_constraint() {
        let c = parse_constraint("(p & q) & r", &[]).unwrap();
        assert_eq!(c.atoms().len(), 3);
    }
}
