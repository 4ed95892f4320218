//! Parser for the textual utcc syntax printed by `Process`'s `Display`.
//!
//! ```text
//! P ::= U ('||' U)*
//! U ::= skip | tell(C) | ptell(C) | (P)
//!     | (abs x, y; C [excluding {x -> t} ...]) U | when C do U
//!     | (local x, y [; C]) U | next U | unless C next U | !U | ![n] U
//!     | wait x, y; C do U | waitack x, y; C do U | whenever C do U
//! ```

use crate::constraint::text::{additive, constraint};
use crate::constraint::{Constraint, Substitution, Term};
use crate::error::SyntaxError;
use crate::lexer::{tokenize, Cursor, Dialect, Tok};

use super::process::Process;

pub fn parse_process(src: &str) -> Result<Process, SyntaxError> {
    let mut cur = Cursor::new(tokenize(src, Dialect::Generated)?);
    let mut scope = Vec::new();
    let p = par(&mut cur, &mut scope)?;
    if !cur.at_eof() {
        return Err(cur.unexpected("end of process"));
    }
    Ok(p)
}

fn par(cur: &mut Cursor, scope: &mut Vec<String>) -> Result<Process, SyntaxError> {
    let mut parts = vec![unary(cur, scope)?];
    while cur.eat_sym("||") {
        parts.push(unary(cur, scope)?);
    }
    Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Process::Par(parts) })
}

fn binders(cur: &mut Cursor) -> Result<Vec<String>, SyntaxError> {
    let mut out = vec![cur.ident()?];
    while cur.eat_sym(",") {
        out.push(cur.ident()?);
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = out.iter().find(|b| !seen.insert(b.as_str())) {
        return Err(cur.error(format!("binder `{dup}` repeated")));
    }
    Ok(out)
}

fn scoped<T>(scope: &mut Vec<String>, bs: &[String], f: impl FnOnce(&mut Vec<String>) -> T) -> T {
    let depth = scope.len();
    scope.extend(bs.iter().cloned());
    let r = f(scope);
    scope.truncate(depth);
    r
}

fn paren_constraint(cur: &mut Cursor, scope: &mut Vec<String>) -> Result<Constraint, SyntaxError> {
    cur.expect_sym("(")?;
    let c = constraint(cur, scope)?;
    cur.expect_sym(")")?;
    Ok(c)
}

fn unary(cur: &mut Cursor, scope: &mut Vec<String>) -> Result<Process, SyntaxError> {
    if cur.eat_kw("skip") {
        return Ok(Process::Skip);
    }
    if cur.eat_kw("tell") {
        return Ok(Process::Tell(paren_constraint(cur, scope)?));
    }
    if cur.eat_kw("ptell") {
        return Ok(Process::PTell(paren_constraint(cur, scope)?));
    }
    if cur.eat_kw("next") {
        return Ok(Process::next(unary(cur, scope)?));
    }
    if cur.eat_kw("unless") {
        let guard = constraint(cur, scope)?;
        cur.expect_kw("next")?;
        return Ok(Process::unless(guard, unary(cur, scope)?));
    }
    if cur.eat_kw("when") {
        let guard = constraint(cur, scope)?;
        cur.expect_kw("do")?;
        return Ok(Process::when(guard, unary(cur, scope)?));
    }
    if cur.eat_kw("whenever") {
        let guard = constraint(cur, scope)?;
        cur.expect_kw("do")?;
        return Ok(Process::whenever(guard, unary(cur, scope)?));
    }
    for (kw, ack) in [("wait", false), ("waitack", true)] {
        if cur.eat_kw(kw) {
            let bs = binders(cur)?;
            cur.expect_sym(";")?;
            let (guard, body) = scoped(scope, &bs, |scope| -> Result<_, SyntaxError> {
                let g = constraint(cur, scope)?;
                cur.expect_kw("do")?;
                Ok((g, unary(cur, scope)?))
            })?;
            return Ok(if ack { Process::wait_ack(bs, guard, body) } else { Process::wait(bs, guard, body) });
        }
    }
    if cur.eat_sym("!") {
        return Ok(Process::bang(unary(cur, scope)?));
    }
    if cur.eat_sym("![") {
        let n = match cur.bump() {
            Tok::Int(n) if n >= 1 && n <= u32::MAX as i64 => n as u32,
            _ => return Err(cur.error("replication bound must be a positive integer")),
        };
        cur.expect_sym("]")?;
        return Ok(Process::bang_n(n, unary(cur, scope)?));
    }
    if cur.is_sym("(") && cur.peek_at(1) == &Tok::Ident("abs".into()) {
        cur.bump();
        cur.bump();
        // A fired binder-less abstraction prints as `(abs ; c excluding {})`.
        let bs = if cur.is_sym(";") { Vec::new() } else { binders(cur)? };
        cur.expect_sym(";")?;
        let guard = scoped(scope, &bs, |scope| constraint(cur, scope))?;
        let mut exclusions = Vec::new();
        if cur.eat_kw("excluding") {
            while cur.is_sym("{") {
                exclusions.push(exclusion(cur, scope, &bs)?);
            }
        }
        cur.expect_sym(")")?;
        let body = scoped(scope, &bs, |scope| unary(cur, scope))?;
        return Ok(Process::Abs { binders: bs, guard, body: Box::new(body), exclusions });
    }
    if cur.is_sym("(") && cur.peek_at(1) == &Tok::Ident("local".into()) {
        cur.bump();
        cur.bump();
        let vs = binders(cur)?;
        let init =
            if cur.eat_sym(";") { scoped(scope, &vs, |scope| constraint(cur, scope))? } else { Constraint::True };
        cur.expect_sym(")")?;
        let body = scoped(scope, &vs, |scope| unary(cur, scope))?;
        return Ok(Process::local(vs, init, body));
    }
    if cur.eat_sym("(") {
        let p = par(cur, scope)?;
        cur.expect_sym(")")?;
        return Ok(p);
    }
    Err(cur.unexpected("a process"))
}

fn exclusion(cur: &mut Cursor, scope: &[String], bs: &[String]) -> Result<Substitution, SyntaxError> {
    cur.expect_sym("{")?;
    let mut bindings = Vec::new();
    while !cur.is_sym("}") {
        let v = cur.ident()?;
        if !bs.contains(&v) {
            return Err(cur.error(format!("`{v}` is not a binder of this abstraction")));
        }
        cur.expect_sym("->")?;
        let t = additive(cur, scope)?;
        bindings.push((v, t));
        if !cur.eat_sym(",") {
            break;
        }
    }
    cur.expect_sym("}")?;
    let ordered: Vec<(String, Term)> =
        bs.iter().filter_map(|b| bindings.iter().find(|(v, _)| v == b).cloned()).collect();
    if ordered.len() != bs.len() {
        return Err(cur.error("an exclusion must bind every binder"));
    }
    Ok(Substitution::new(ordered))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(src: &str) -> Process {
        let p = parse_process(src).unwrap();
        let printed = p.to_string();
        assert_eq!(parse_process(&printed).unwrap(), p, "{src} printed as {printed}");
        p
    }

    #[test]
    fn round_trips_core_forms() {
        rt("skip");
        rt("tell(out(k, 5)) || next tell(a)");
        rt("(abs x; out(k, x)) tell(got(x))");
        rt("(abs x; out(k, x) excluding {x -> 5} {x -> 7}) tell(got(x))");
        rt("(abs ; c excluding {}) tell(d)");
        rt("(local go, stop; out'(go)) unless out'(stop) next tell(out'(go))");
        rt("!when c do ![3] tell(d)");
        rt("ptell(req(a, k#1)) || waitack k; req(a, k) do tell(acc(a, k)) || whenever acc(a, k#1) do next skip");
        rt("wait x, y; p(x, y) & holds((x < y)) do (tell(a) || tell(b))");
    }

    #[test]
    fn binders_become_variables() {
        let p = rt("(abs x; out(k, x)) tell(got(x))");
        let Process::Abs { guard, .. } = p else { panic!() };
        assert_eq!(guard, Constraint::atom("out", vec![Term::sym("k"), Term::var("x")]));
    }

    #[test]
    fn reports_position() {
        let err = parse_process("tell(a) ||").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(parse_process("(abs x, x; p(x)) skip").is_err());
        assert!(parse_process("![0] skip").is_err());
    }
}
