//! Concrete syntax:
//!
//! ```text
//! request a(k) in P          accept a(k) in P
//! request a(k, m) in P       accept a(k : C) in P       kill(k)
//! k![e1, e2] P               k?(x1, x2) in P
//! k <| l; P                  k |> { l1: P1 || l2: P2 }
//! throw k![k'] P             catch k?((k')) in P
//! if e then P else Q         P | Q        0        new u in P
//! def X(x; k) = P and Y(y k) = Q in R                X[e; k]   X[e k]
//! ```
//!
//! Prefix continuations bind tightly; `def … in` extends as far right as
//! possible. Parameters and call arguments may be written without `;`, in
//! which case a parameter used as a channel in the body is a channel
//! parameter, and call arguments are split by the declaration's arity.

use std::collections::BTreeSet;

use super::ast::{dur_var, Decl, HvkProcess};
use crate::constraint::text::{additive, constraint, term};
use crate::constraint::{Term, Value};
use crate::error::SyntaxError;
use crate::lexer::{tokenize, Cursor, Dialect, Tok};

const RESERVED: &[&str] = &[
    "request", "accept", "in", "throw", "catch", "if", "then", "else", "new", "def", "and", "kill", "true", "false",
    "not", "or",
];

pub fn parse(src: &str) -> Result<HvkProcess, SyntaxError> {
    parse_dialect(src, Dialect::Source)
}

/// Also accepts generated names (`k#3`), as found in printed reduction states.
pub fn parse_generated(src: &str) -> Result<HvkProcess, SyntaxError> {
    parse_dialect(src, Dialect::Generated)
}

fn parse_dialect(src: &str, dialect: Dialect) -> Result<HvkProcess, SyntaxError> {
    let mut p = Parser { cur: Cursor::new(tokenize(src, dialect)?), scope: Vec::new() };
    let proc = p.par()?;
    if !p.cur.at_eof() {
        return Err(p.cur.unexpected("`|` or end of input"));
    }
    Ok(resolve_calls(&proc, &mut Vec::new()))
}

struct Parser {
    cur: Cursor,
    scope: Vec<String>,
}

impl Parser {
    fn name(&mut self) -> Result<String, SyntaxError> {
        if let Tok::Ident(s) = self.cur.peek() {
            if RESERVED.contains(&s.as_str()) {
                return Err(self.cur.error(format!("`{s}` is a keyword")));
            }
        }
        self.cur.ident()
    }

    fn names(&mut self, close: &str) -> Result<Vec<String>, SyntaxError> {
        let mut out = Vec::new();
        if self.cur.is_sym(close) {
            return Ok(out);
        }
        loop {
            out.push(self.name()?);
            if !self.cur.eat_sym(",") {
                return Ok(out);
            }
        }
    }

    fn scoped<T>(&mut self, names: &[String], f: impl FnOnce(&mut Self) -> T) -> T {
        let depth = self.scope.len();
        self.scope.extend(names.iter().cloned());
        let r = f(self);
        self.scope.truncate(depth);
        r
    }

    fn par(&mut self) -> Result<HvkProcess, SyntaxError> {
        let mut parts = vec![self.unary()?];
        while self.cur.eat_sym("|") {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { HvkProcess::Par(parts) })
    }

    fn unary(&mut self) -> Result<HvkProcess, SyntaxError> {
        match self.cur.peek().clone() {
            Tok::Int(0) => {
                self.cur.bump();
                Ok(HvkProcess::Inact)
            }
            Tok::Sym("(") => {
                self.cur.bump();
                let p = self.par()?;
                self.cur.expect_sym(")")?;
                Ok(p)
            }
            Tok::Ident(kw) => match kw.as_str() {
                "request" => self.request(),
                "accept" => self.accept(),
                "throw" => {
                    self.cur.bump();
                    let chan = self.name()?;
                    self.cur.expect_sym("![")?;
                    let sent = self.name()?;
                    self.cur.expect_sym("]")?;
                    Ok(HvkProcess::Throw { chan, sent, body: Box::new(self.unary()?) })
                }
                "catch" => {
                    self.cur.bump();
                    let chan = self.name()?;
                    self.cur.expect_sym("?(")?;
                    self.cur.expect_sym("(")?;
                    let bound = self.name()?;
                    self.cur.expect_sym(")")?;
                    self.cur.expect_sym(")")?;
                    self.cur.expect_kw("in")?;
                    let body = self.scoped(std::slice::from_ref(&bound), |p| p.unary())?;
                    Ok(HvkProcess::Catch { chan, bound, body: Box::new(body) })
                }
                "if" => {
                    self.cur.bump();
                    let cond = term(&mut self.cur, &self.scope)?;
                    self.cur.expect_kw("then")?;
                    let then = self.unary()?;
                    self.cur.expect_kw("else")?;
                    let els = self.unary()?;
                    Ok(HvkProcess::If { cond, then: Box::new(then), els: Box::new(els) })
                }
                "new" => {
                    self.cur.bump();
                    let names = self.names("in")?;
                    if names.is_empty() {
                        return Err(self.cur.unexpected("a name"));
                    }
                    self.cur.expect_kw("in")?;
                    let body = self.scoped(&names, |p| p.unary())?;
                    Ok(HvkProcess::New { names, body: Box::new(body) })
                }
                "def" => self.def(),
                "kill" => {
                    self.cur.bump();
                    self.cur.expect_sym("(")?;
                    let k = self.name()?;
                    self.cur.expect_sym(")")?;
                    Ok(HvkProcess::Kill(k))
                }
                _ => self.prefix(),
            },
            _ => Err(self.cur.unexpected("a process")),
        }
    }

    fn request(&mut self) -> Result<HvkProcess, SyntaxError> {
        self.cur.bump();
        let service = self.name()?;
        self.cur.expect_sym("(")?;
        let chan = self.name()?;
        let duration = if self.cur.eat_sym(",") { Some(additive(&mut self.cur, &self.scope)?) } else { None };
        self.cur.expect_sym(")")?;
        self.cur.expect_kw("in")?;
        let body = Box::new(self.scoped(std::slice::from_ref(&chan), |p| p.unary())?);
        Ok(match duration {
            Some(duration) => HvkProcess::TimedRequest { service, chan, duration, body },
            None => HvkProcess::Request { service, chan, body },
        })
    }

    fn accept(&mut self) -> Result<HvkProcess, SyntaxError> {
        self.cur.bump();
        let service = self.name()?;
        self.cur.expect_sym("(")?;
        let chan = self.name()?;
        let precond = if self.cur.eat_sym(":") {
            let mut scope = self.scope.clone();
            scope.push(dur_var(&chan));
            Some(constraint(&mut self.cur, &mut scope)?)
        } else {
            None
        };
        self.cur.expect_sym(")")?;
        self.cur.expect_kw("in")?;
        let body = Box::new(self.scoped(std::slice::from_ref(&chan), |p| p.unary())?);
        Ok(match precond {
            Some(precond) => HvkProcess::DeclAccept { service, chan, precond, body },
            None => HvkProcess::Accept { service, chan, body },
        })
    }

    fn prefix(&mut self) -> Result<HvkProcess, SyntaxError> {
        let chan = self.name()?;
        match self.cur.peek() {
            Tok::Sym("![") => {
                self.cur.bump();
                let mut exprs = Vec::new();
                if !self.cur.is_sym("]") {
                    loop {
                        exprs.push(term(&mut self.cur, &self.scope)?);
                        if !self.cur.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.cur.expect_sym("]")?;
                Ok(HvkProcess::Send { chan, exprs, body: Box::new(self.unary()?) })
            }
            Tok::Sym("?(") => {
                self.cur.bump();
                let vars = self.names(")")?;
                if vars.iter().collect::<BTreeSet<_>>().len() != vars.len() {
                    return Err(self.cur.error("received variables must be distinct"));
                }
                self.cur.expect_sym(")")?;
                self.cur.expect_kw("in")?;
                let body = self.scoped(&vars, |p| p.unary())?;
                Ok(HvkProcess::Receive { chan, vars, body: Box::new(body) })
            }
            Tok::Sym("<|") => {
                self.cur.bump();
                let label = self.name()?;
                self.cur.expect_sym(";")?;
                Ok(HvkProcess::Select { chan, label, body: Box::new(self.unary()?) })
            }
            Tok::Sym("|>") => {
                self.cur.bump();
                self.cur.expect_sym("{")?;
                let mut branches: Vec<(String, HvkProcess)> = Vec::new();
                loop {
                    let label = self.name()?;
                    if branches.iter().any(|(l, _)| *l == label) {
                        return Err(self.cur.error(format!("duplicate branch label `{label}`")));
                    }
                    self.cur.expect_sym(":")?;
                    branches.push((label, self.par()?));
                    if !self.cur.eat_sym("||") {
                        break;
                    }
                }
                self.cur.expect_sym("}")?;
                Ok(HvkProcess::Branch { chan, branches })
            }
            Tok::Sym("[") => {
                self.cur.bump();
                let (args, chans) = self.call_args()?;
                Ok(HvkProcess::Call { name: chan, args, chans })
            }
            _ => Err(self.cur.unexpected("`![`, `?(`, `<|`, `|>` or `[`")),
        }
    }

    fn call_args(&mut self) -> Result<(Vec<Term>, Vec<String>), SyntaxError> {
        let mut args = Vec::new();
        while !self.cur.is_sym("]") && !self.cur.is_sym(";") {
            args.push(additive(&mut self.cur, &self.scope)?);
            self.cur.eat_sym(",");
        }
        let mut chans = Vec::new();
        if self.cur.eat_sym(";") {
            while !self.cur.is_sym("]") {
                chans.push(self.name()?);
                self.cur.eat_sym(",");
            }
        }
        self.cur.expect_sym("]")?;
        Ok((args, chans))
    }

    fn def(&mut self) -> Result<HvkProcess, SyntaxError> {
        self.cur.bump();
        let mut decls: Vec<Decl> = Vec::new();
        loop {
            let name = self.name()?;
            if decls.iter().any(|d| d.name == name) {
                return Err(self.cur.error(format!("`{name}` declared twice")));
            }
            self.cur.expect_sym("(")?;
            let mut params = Vec::new();
            while !self.cur.is_sym(")") && !self.cur.is_sym(";") {
                params.push(self.name()?);
                self.cur.eat_sym(",");
            }
            let mut chans = Vec::new();
            let split = self.cur.eat_sym(";");
            if split {
                while !self.cur.is_sym(")") {
                    chans.push(self.name()?);
                    self.cur.eat_sym(",");
                }
            }
            self.cur.expect_sym(")")?;
            let all: Vec<String> = params.iter().chain(&chans).cloned().collect();
            if all.iter().collect::<BTreeSet<_>>().len() != all.len() {
                return Err(self.cur.error(format!("parameters of `{name}` must be distinct")));
            }
            self.cur.expect_sym("=")?;
            let body = self.scoped(&all, |p| p.par())?;
            if !split {
                let used = channel_uses(&body);
                let first_chan = params.iter().position(|x| used.contains(x)).unwrap_or(params.len());
                if params[first_chan..].iter().any(|x| !used.contains(x)) {
                    return Err(self
                        .cur
                        .error(format!("parameters of `{name}` mix data and channels; separate them with `;`")));
                }
                chans = params.split_off(first_chan);
            }
            decls.push(Decl { name, params, chans, body });
            if !self.cur.eat_kw("and") {
                break;
            }
        }
        self.cur.expect_kw("in")?;
        let body = self.par()?;
        Ok(HvkProcess::Def { decls, body: Box::new(body) })
    }
}

/// Free names used in channel or service position.
fn channel_uses(p: &HvkProcess) -> BTreeSet<String> {
    use HvkProcess::*;
    let mut out = BTreeSet::new();
    let mut add = |n: &str| {
        out.insert(n.to_string());
    };
    let rest = |body: &HvkProcess, bound: &[&String], out: &mut BTreeSet<String>| {
        out.extend(channel_uses(body).into_iter().filter(|n| !bound.contains(&n)));
    };
    match p {
        Request { service, chan, body }
        | Accept { service, chan, body }
        | TimedRequest { service, chan, body, .. }
        | DeclAccept { service, chan, body, .. } => {
            add(service);
            rest(body, &[chan], &mut out);
        }
        Receive { chan, vars, body } => {
            add(chan);
            rest(body, &vars.iter().collect::<Vec<_>>(), &mut out);
        }
        Catch { chan, bound, body } => {
            add(chan);
            rest(body, &[bound], &mut out);
        }
        Throw { chan, sent, body } => {
            add(chan);
            add(sent);
            rest(body, &[], &mut out);
        }
        New { names, body } => rest(body, &names.iter().collect::<Vec<_>>(), &mut out),
        Def { decls, body } => {
            for d in decls {
                rest(&d.body, &d.params.iter().chain(&d.chans).collect::<Vec<_>>(), &mut out);
            }
            rest(body, &[], &mut out);
        }
        Call { chans, .. } => chans.iter().for_each(|c| add(c)),
        other => {
            if let Some(k) = other.subject() {
                add(k);
            }
            for c in other.children() {
                rest(c, &[], &mut out);
            }
        }
    }
    out
}

/// Splits `X[e k]`-style calls using the arity of the visible declaration.
fn resolve_calls(p: &HvkProcess, env: &mut Vec<(String, usize, usize)>) -> HvkProcess {
    use HvkProcess::*;
    let b = |q: &HvkProcess, env: &mut Vec<(String, usize, usize)>| Box::new(resolve_calls(q, env));
    match p {
        Call { name, args, chans } if chans.is_empty() => {
            let Some(&(_, np, nc)) = env.iter().rev().find(|(n, _, _)| n == name) else {
                return p.clone();
            };
            if nc == 0 || args.len() != np + nc {
                return p.clone();
            }
            let names: Option<Vec<String>> = args[np..]
                .iter()
                .map(|t| match t {
                    Term::Var(s) | Term::Const(Value::Sym(s)) => Some(s.clone()),
                    _ => None,
                })
                .collect();
            match names {
                Some(chans) => Call { name: name.clone(), args: args[..np].to_vec(), chans },
                None => p.clone(),
            }
        }
        Def { decls, body } => {
            let depth = env.len();
            env.extend(decls.iter().map(|d| (d.name.clone(), d.params.len(), d.chans.len())));
            let decls = decls.iter().map(|d| Decl { body: resolve_calls(&d.body, env), ..d.clone() }).collect();
            let body = b(body, env);
            env.truncate(depth);
            Def { decls, body }
        }
        Inact | Call { .. } | Kill(_) => p.clone(),
        Request { service, chan, body } => Request { service: service.clone(), chan: chan.clone(), body: b(body, env) },
        Accept { service, chan, body } => Accept { service: service.clone(), chan: chan.clone(), body: b(body, env) },
        TimedRequest { service, chan, duration, body } => TimedRequest {
            service: service.clone(),
            chan: chan.clone(),
            duration: duration.clone(),
            body: b(body, env),
        },
        DeclAccept { service, chan, precond, body } => {
            DeclAccept { service: service.clone(), chan: chan.clone(), precond: precond.clone(), body: b(body, env) }
        }
        Send { chan, exprs, body } => Send { chan: chan.clone(), exprs: exprs.clone(), body: b(body, env) },
        Receive { chan, vars, body } => Receive { chan: chan.clone(), vars: vars.clone(), body: b(body, env) },
        Select { chan, label, body } => Select { chan: chan.clone(), label: label.clone(), body: b(body, env) },
        Branch { chan, branches } => Branch {
            chan: chan.clone(),
            branches: branches.iter().map(|(l, q)| (l.clone(), resolve_calls(q, env))).collect(),
        },
        Throw { chan, sent, body } => Throw { chan: chan.clone(), sent: sent.clone(), body: b(body, env) },
        Catch { chan, bound, body } => Catch { chan: chan.clone(), bound: bound.clone(), body: b(body, env) },
        If { cond, then, els } => If { cond: cond.clone(), then: b(then, env), els: b(els, env) },
        Par(ps) => Par(ps.iter().map(|q| resolve_calls(q, env)).collect()),
        New { names, body } => New { names: names.clone(), body: b(body, env) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(src: &str) -> HvkProcess {
        let p = parse(src).unwrap_or_else(|e| panic!("{src}: {e}"));
        let printed = p.to_string();
        assert_eq!(parse(&printed).unwrap(), p, "{src} printed as {printed}");
        p
    }

    #[test]
    fn smallest_request() {
        assert_eq!(
            rt("request a(k) in 0"),
            HvkProcess::Request { service: "a".into(), chan: "k".into(), body: Box::new(HvkProcess::Inact) }
        );
    }

    #[test]
    fn unbalanced_send_is_rejected() {
        let e = parse("k![x | 0").unwrap_err();
        assert_eq!((e.line, e.col), (1, 6));
    }

    #[test]
    fn generated_names_are_rejected_in_sources() {
        assert!(parse("k#1![1] 0").is_err());
        assert!(parse_generated("k#1![1] 0").is_ok());
    }

    #[test]
    fn bound_identifiers_become_variables() {
        let p = rt("k?(x) in k![x + 1, y] 0");
        let HvkProcess::Receive { body, .. } = p else { panic!() };
        let HvkProcess::Send { exprs, .. } = *body else { panic!() };
        assert_eq!(exprs[0].to_string(), "(x + 1)");
        assert_eq!(exprs[0].vars().len(), 1);
        assert!(exprs[1].vars().is_empty());
    }

    #[test]
    fn every_construct_round_trips() {
        rt("k <| withdraw; k![58] 0 | k |> { withdraw: k?(amt) in 0 || deposit: 0 }");
        rt("throw k![j] 0 | catch k?((j)) in j![1] 0");
        rt("if 1500 <= 1500 then (k![1] 0 | h![2] 0) else 0");
        rt("new u, v in k![u] 0");
        rt("def X(x; k) = k![x] X[x + 1; k] and Y(; j) = 0 in X[5; k0] | Y[; k1]");
        rt("request ob(k, 3) in k![data] 0 | accept ob(k : dur_k <= 500) in kill(k)");
        rt("k?(offer) in if offer.price <= 1500 then k <| contract; 0 else 0");
    }

    #[test]
    fn space_separated_parameters_and_arguments() {
        let p = rt("def X(x k) = k![x] 0 in X[5 k0]");
        let HvkProcess::Def { decls, body } = p else { panic!() };
        assert_eq!((decls[0].params.clone(), decls[0].chans.clone()), (vec!["x".to_string()], vec!["k".to_string()]));
        assert_eq!(body.to_string(), "X[5; k0]");
    }

    #[test]
    fn def_extends_to_the_right() {
        let p = rt("def X(;) = 0 in X[;] | k![1] 0");
        assert!(matches!(p, HvkProcess::Def { body, .. } if matches!(*body, HvkProcess::Par(_))));
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(parse("k |> { a: 0 || a: 0 }").is_err());
    }

    #[test]
    fn atm_reader_and_user() {
        let reader = "accept r(k2) in k2?(id) in request a(k) in k![id] \
            k2 |> { withdraw: k2?(amt) in k <| withdraw; k![amt] \
                k |> { dispense: k2 <| dispense; k2![amt] R[k, amt] || overdraft: kb![0] 0 } }";
        let p = rt(reader);
        assert!(matches!(p, HvkProcess::Accept { .. }));
        rt("request r(k2) in k2![myId] k2 <| withdraw; k2![58] k2 |> { dispense: k2?(amt) in 0 || overdraft: 0 }");
    }
}
