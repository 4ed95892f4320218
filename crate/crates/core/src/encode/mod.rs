//! Compositional translation of HVK and timed HVK programs into utcc.
//!
//! Free names become name constants; names bound by the source program
//! become utcc variables with a `$` suffix, which keeps the printed output
//! parseable with bound and free names kept apart.

mod guard;

use std::collections::{BTreeSet, HashMap};

pub use guard::{guard_process, guard_process_latching};

use crate::constraint::{is_generated, Atom, Constraint, Op, Term, Value};
use crate::error::EncodeError;
use crate::hvk::{dur_var, eval_expr, Decl, HvkProcess};
use crate::utcc::Process;

/// Predicate names used by the encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicates {
    pub req: String,
    pub acc: String,
    pub out: String,
    pub sel: String,
    pub outk: String,
    pub act: String,
    pub kill: String,
    /// Persistent record of accepted sessions, emitted when counting.
    pub sess: String,
    /// Process variable `X` calls through `<call_prefix>X`.
    pub call_prefix: String,
}

impl Default for Predicates {
    fn default() -> Self {
        Predicates {
            req: "req".into(),
            acc: "acc".into(),
            out: "out".into(),
            sel: "sel".into(),
            outk: "outk".into(),
            act: "act".into(),
            kill: "kill".into(),
            sess: "sess".into(),
            call_prefix: "call_".into(),
        }
    }
}

impl Predicates {
    pub fn call(&self, x: &str) -> String {
        format!("{}{x}", self.call_prefix)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EncodingContext {
    pub preds: Predicates,
    /// Accept the timed constructs.
    pub timed: bool,
    /// Accepting a session also tells a persistent `sess(a, k)`.
    pub counting: bool,
}

impl EncodingContext {
    pub fn untimed() -> Self {
        Self::default()
    }

    pub fn timed() -> Self {
        EncodingContext { timed: true, ..Self::default() }
    }
}

/// Translates a program. Timed constructs need `ctx.timed`.
pub fn encode(p: &HvkProcess, ctx: &EncodingContext) -> Result<Process, EncodeError> {
    Encoder { ctx, env: HashMap::new(), decls: Vec::new(), fresh: 0 }.proc(p)
}

/// The timed encoding, whatever `ctx.timed` says.
pub fn encode_timed(p: &HvkProcess, ctx: &EncodingContext) -> Result<Process, EncodeError> {
    let ctx = EncodingContext { timed: true, ..ctx.clone() };
    encode(p, &ctx)
}

/// One replicated abstraction per declaration. Calls to the listed
/// declarations inside the bodies become `tell(call_X(…))`.
pub fn encode_recursion(decls: &[Decl], ctx: &EncodingContext) -> Result<Process, EncodeError> {
    let mut enc =
        Encoder { ctx, env: HashMap::new(), decls: vec![decls.iter().map(|d| d.name.clone()).collect()], fresh: 0 };
    enc.recursion(decls)
}

struct Encoder<'a> {
    ctx: &'a EncodingContext,
    /// Source binder to utcc variable.
    env: HashMap<String, String>,
    /// Declared process variables, innermost scope last.
    decls: Vec<BTreeSet<String>>,
    fresh: usize,
}

impl Encoder<'_> {
    fn name(&self, n: &str) -> Term {
        match self.env.get(n) {
            Some(v) => Term::var(v.clone()),
            None if is_generated(n) => Term::var(n),
            None => Term::sym(n),
        }
    }

    fn expr(&self, e: &Term) -> Result<Term, EncodeError> {
        let mut bad = None;
        let t = e.subst(&|v| self.env.get(v).map(|b| Term::var(b.clone())));
        visit_syms(&t, &mut |s| {
            if s.starts_with("dur_") {
                bad = Some(s.to_string());
            }
        });
        match bad {
            Some(s) => Err(EncodeError::DurationOutsidePrecondition(s)),
            None => Ok(t),
        }
    }

    /// Binds source names for the duration of `f`, returning their utcc names.
    fn bind<T>(
        &mut self,
        names: &[String],
        f: impl FnOnce(&mut Self, &[String]) -> Result<T, EncodeError>,
    ) -> Result<T, EncodeError> {
        let saved: Vec<(String, Option<String>)> =
            names.iter().map(|n| (n.clone(), self.env.get(n).cloned())).collect();
        let vars: Vec<String> = names.iter().map(|n| format!("{n}$")).collect();
        for (n, v) in names.iter().zip(&vars) {
            self.env.insert(n.clone(), v.clone());
        }
        let r = f(self, &vars);
        for (n, old) in saved {
            match old {
                Some(v) => self.env.insert(n, v),
                None => self.env.remove(&n),
            };
        }
        r
    }

    /// A utcc variable that no source binder can produce.
    fn internal(&mut self, hint: &str) -> String {
        self.fresh += 1;
        format!("{hint}${}", self.fresh)
    }

    fn atom(&self, pred: &str, args: Vec<Term>) -> Constraint {
        Constraint::Atom(Atom::new(pred, args))
    }

    fn payload(&self, mut items: Vec<Term>) -> Term {
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Term::Tuple(items)
        }
    }

    /// `ptell(c) || whenever ack(c) do next P`.
    fn offer(&self, c: Constraint, cont: Process) -> Process {
        Process::par(vec![Process::PTell(c.clone()), Process::whenever(c.ack(), Process::next(cont))])
    }

    /// The encoding of `kill(k)`. Once issued under an active session it
    /// stays issued, so the guard only delays its start.
    fn is_kill(&self, p: &Process) -> bool {
        matches!(p, Process::Bang(b) if matches!(&**b, Process::Tell(Constraint::Atom(a)) if a.pred == self.ctx.preds.kill))
    }

    fn guarded(&self, chan: &Term, p: Process) -> Process {
        guard_process_latching(&self.atom(&self.ctx.preds.act, vec![chan.clone()]), &p, &|q| self.is_kill(q))
    }

    fn proc(&mut self, p: &HvkProcess) -> Result<Process, EncodeError> {
        use HvkProcess::*;
        let preds = &self.ctx.preds.clone();
        Ok(match p {
            Inact => Process::Skip,
            Request { service, chan, body } => {
                let a = self.name(service);
                self.bind(std::slice::from_ref(chan), |e, vs| {
                    let k = Term::var(vs[0].clone());
                    let cont = e.proc(body)?;
                    Ok(Process::local(
                        vs.to_vec(),
                        Constraint::True,
                        Process::par(vec![
                            Process::PTell(e.atom(&preds.req, vec![a.clone(), k.clone()])),
                            Process::whenever(e.atom(&preds.acc, vec![a, k]), Process::next(cont)),
                        ]),
                    ))
                })?
            }
            Accept { service, chan, body } => {
                let a = self.name(service);
                self.bind(std::slice::from_ref(chan), |e, vs| {
                    let k = Term::var(vs[0].clone());
                    let cont = e.proc(body)?;
                    let mut parts =
                        vec![Process::tell(e.atom(&preds.acc, vec![a.clone(), k.clone()])), Process::next(cont)];
                    if e.ctx.counting {
                        parts.push(Process::bang(Process::tell(e.atom(&preds.sess, vec![a.clone(), k.clone()]))));
                    }
                    Ok(Process::wait_ack(vs.to_vec(), e.atom(&preds.req, vec![a, k]), Process::par(parts)))
                })?
            }
            Send { chan, exprs, body } => {
                let k = self.name(chan);
                let es = exprs.iter().map(|e| self.expr(e)).collect::<Result<Vec<_>, _>>()?;
                let c = self.atom(&preds.out, vec![k, self.payload(es)]);
                let cont = self.proc(body)?;
                self.offer(c, cont)
            }
            Receive { chan, vars, body } => {
                let k = self.name(chan);
                self.bind(vars, |e, vs| {
                    let pat = e.payload(vs.iter().map(|v| Term::var(v.clone())).collect());
                    let cont = e.proc(body)?;
                    Ok(Process::wait_ack(vs.to_vec(), e.atom(&preds.out, vec![k, pat]), Process::next(cont)))
                })?
            }
            Select { chan, label, body } => {
                let c = self.atom(&preds.sel, vec![self.name(chan), Term::sym(label)]);
                let cont = self.proc(body)?;
                self.offer(c, cont)
            }
            Branch { chan, branches } => {
                let k = self.name(chan);
                let l = self.internal("l");
                let mut arms = Vec::new();
                for (li, pi) in branches {
                    let cont = self.proc(pi)?;
                    arms.push(Process::when(Constraint::Eq(Term::var(l.clone()), Term::sym(li)), Process::next(cont)));
                }
                Process::wait_ack(vec![l.clone()], self.atom(&preds.sel, vec![k, Term::var(l)]), Process::par(arms))
            }
            Throw { chan, sent, body } => {
                let c = self.atom(&preds.outk, vec![self.name(chan), self.name(sent)]);
                let cont = self.proc(body)?;
                self.offer(c, cont)
            }
            Catch { chan, bound, body } => {
                let k = self.name(chan);
                self.bind(std::slice::from_ref(bound), |e, vs| {
                    let cont = e.proc(body)?;
                    Ok(Process::wait_ack(
                        vs.to_vec(),
                        e.atom(&preds.outk, vec![k, Term::var(vs[0].clone())]),
                        Process::next(cont),
                    ))
                })?
            }
            If { cond, then, els } => {
                let c = self.expr(cond)?;
                let (p, q) = (self.proc(then)?, self.proc(els)?);
                Process::par(vec![
                    Process::when(Constraint::Holds(c.clone()), Process::next(p)),
                    Process::when(Constraint::Holds(Term::apply(Op::Not, vec![c])), Process::next(q)),
                ])
            }
            Par(ps) => Process::par(ps.iter().map(|q| self.proc(q)).collect::<Result<Vec<_>, _>>()?),
            New { names, body } => {
                self.bind(names, |e, vs| Ok(Process::local(vs.to_vec(), Constraint::True, e.proc(body)?)))?
            }
            Def { decls, body } => {
                self.decls.push(decls.iter().map(|d| d.name.clone()).collect());
                let r = self.recursion(decls).and_then(|defs| Ok(Process::par(vec![defs, self.proc(body)?])));
                self.decls.pop();
                r?
            }
            Call { name, args, chans } => {
                if !self.decls.iter().any(|s| s.contains(name)) {
                    return Err(EncodeError::UnknownProcessVar(name.clone()));
                }
                let mut ts = args.iter().map(|e| self.expr(e)).collect::<Result<Vec<_>, _>>()?;
                ts.extend(chans.iter().map(|c| self.name(c)));
                Process::tell(self.atom(&preds.call(name), ts))
            }
            TimedRequest { service, chan, duration, body } => {
                if !self.ctx.timed {
                    return Err(EncodeError::TimedConstruct("request a(k, m)"));
                }
                let m = match eval_expr(&self.expr(duration)?, &HashMap::new()) {
                    Ok(Term::Const(Value::Int(n))) if n >= 1 => n,
                    _ => return Err(EncodeError::BadDuration(duration.to_string())),
                };
                let a = self.name(service);
                self.bind(std::slice::from_ref(chan), |e, vs| {
                    let k = Term::var(vs[0].clone());
                    let act = Process::tell(e.atom(&preds.act, vec![k.clone()]));
                    let cont = e.proc(body)?;
                    let mut session = vec![act.clone(), e.guarded(&k, cont)];
                    // act(k) is told now and in each of the next m-1 units.
                    if m > 1 {
                        session.push(Process::bang_n(
                            (m - 1) as u32,
                            Process::unless(e.atom(&preds.kill, vec![k.clone()]), act),
                        ));
                    }
                    Ok(Process::local(
                        vs.to_vec(),
                        Constraint::True,
                        Process::par(vec![
                            Process::PTell(e.atom(&preds.req, vec![a.clone(), k.clone(), Term::int(m)])),
                            Process::whenever(e.atom(&preds.acc, vec![a, k]), Process::next(Process::par(session))),
                        ]),
                    ))
                })?
            }
            DeclAccept { service, chan, precond, body } => {
                if !self.ctx.timed {
                    return Err(EncodeError::TimedConstruct("accept a(k : C)"));
                }
                let a = self.name(service);
                let m = self.internal("m");
                let dur = dur_var(chan);
                let pre = precond.subst(&|v| {
                    if v == dur {
                        Some(Term::var(m.clone()))
                    } else {
                        self.env.get(v).map(|b| Term::var(b.clone()))
                    }
                });
                self.bind(std::slice::from_ref(chan), |e, vs| {
                    let k = Term::var(vs[0].clone());
                    let cont = e.proc(body)?;
                    let mut parts = vec![
                        Process::tell(e.atom(&preds.acc, vec![a.clone(), k.clone()])),
                        Process::next(e.guarded(&k, cont)),
                    ];
                    if e.ctx.counting {
                        parts.push(Process::bang(Process::tell(e.atom(&preds.sess, vec![a.clone(), k.clone()]))));
                    }
                    let guard = Constraint::and(vec![e.atom(&preds.req, vec![a, k, Term::var(m.clone())]), pre]);
                    Ok(Process::wait_ack(vec![vs[0].clone(), m.clone()], guard, Process::par(parts)))
                })?
            }
            Kill(k) => {
                if !self.ctx.timed {
                    return Err(EncodeError::TimedConstruct("kill(k)"));
                }
                Process::bang(Process::tell(self.atom(&preds.kill, vec![self.name(k)])))
            }
        })
    }

    fn recursion(&mut self, decls: &[Decl]) -> Result<Process, EncodeError> {
        let preds = self.ctx.preds.clone();
        let mut out = Vec::new();
        for d in decls {
            let params: Vec<String> = d.params.iter().chain(&d.chans).cloned().collect();
            out.push(self.bind(&params, |e, vs| {
                let guard = e.atom(&preds.call(&d.name), vs.iter().map(|v| Term::var(v.clone())).collect());
                Ok(Process::bang(Process::abs(vs.to_vec(), guard, e.proc(&d.body)?)))
            })?);
        }
        Ok(Process::par(out))
    }
}

fn visit_syms(t: &Term, f: &mut dyn FnMut(&str)) {
    match t {
        Term::Const(Value::Sym(s)) => f(s),
        Term::Tuple(ts) | Term::Apply(_, ts) => ts.iter().for_each(|t| visit_syms(t, f)),
        _ => {}
    }
}
