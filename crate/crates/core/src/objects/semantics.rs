use std::fmt::Write as _;
use std::sync::Arc;

use super::ir::{AtomicCtx, Command, Expr, Loc, Pc, Program, Value};
use crate::lts::{Action, Lts, StateEncode, Val};
use crate::seqspec::SeqSpec;
use crate::{Error, Result};

/// Per-process part of a configuration.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Proc {
    /// Index into the invocation list while an operation is pending.
    pub inv: Option<u8>,
    pub pc: Pc,
    /// Positions of the two strands while a `Par` is running; `pc` then holds
    /// the continuation.
    pub strands: Option<[Pc; 2]>,
    pub regs: Box<[Value]>,
}

/// A configuration of the object under the most general client.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    pub calls: u8,
    pub procs: Box<[Proc]>,
    pub store: Box<[Value]>,
}

impl Config {
    /// Bitmask of processes with a pending operation.
    pub fn pending(&self) -> u64 {
        self.procs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.inv.is_some())
            .fold(0, |m, (i, _)| m | (1 << i))
    }
}

impl StateEncode for Config {
    fn encode(&self) -> String {
        let mut s = format!("c{}", self.calls);
        for (i, p) in self.procs.iter().enumerate() {
            let _ = write!(s, "|P{}:", i + 1);
            match p.inv {
                None => s.push_str("idle"),
                Some(inv) => {
                    let _ = write!(s, "i{inv}@{}", p.pc);
                    if let Some([a, b]) = p.strands {
                        let _ = write!(s, "[{a},{b}]");
                    }
                }
            }
            s.push('{');
            for (j, r) in p.regs.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{r}");
            }
            s.push('}');
        }
        s.push_str("|S{");
        for (j, v) in self.store.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v}");
        }
        s.push('}');
        s
    }
}

/// ⟦O, n⟧: the object `prog` driven by `n` processes, each repeatedly calling
/// any method of `spec` with any argument.
#[derive(Clone)]
pub struct Semantics {
    pub prog: Arc<Program>,
    pub spec: SeqSpec,
    pub n: usize,
    pub k: usize,
    invocations: Vec<(&'static str, Val)>,
    entries: Vec<Pc>,
    offsets: Vec<usize>,
    lens: Vec<usize>,
    initial: Config,
    live: Arc<Vec<Vec<bool>>>,
}

impl std::fmt::Debug for Semantics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Semantics")
            .field("prog", &self.prog.name)
            .field("n", &self.n)
            .field("k", &self.k)
            .finish()
    }
}

impl Semantics {
    /// `k` sizes the per-call arrays and must be at least the call bound used
    /// for exploration.
    pub fn new(prog: Arc<Program>, spec: &SeqSpec, n: usize, k: usize) -> Result<Semantics> {
        if n == 0 || n > 64 {
            return Err(Error::IllFormedProgram(format!(
                "process count {n} out of range"
            )));
        }
        if k > u8::MAX as usize {
            return Err(Error::IllFormedProgram(format!(
                "call bound {k} out of range"
            )));
        }
        prog.validate()?;
        let invocations = spec.invocations();
        let mut entries = Vec::with_capacity(invocations.len());
        for &(m, _) in &invocations {
            entries.push(prog.entry(m).ok_or_else(|| {
                Error::AlphabetMismatch(format!(
                    "{} has no method {m} required by {}",
                    prog.name, spec.name
                ))
            })?);
        }
        let mut offsets = Vec::with_capacity(prog.vars.len());
        let mut lens = Vec::with_capacity(prog.vars.len());
        let mut store = Vec::new();
        for v in &prog.vars {
            let len = v.dim.len(n, k);
            offsets.push(store.len());
            lens.push(len);
            let base = store.len();
            store.extend(std::iter::repeat_n(v.init.clone(), len));
            for (i, val) in &v.init_at {
                if *i >= len {
                    return Err(Error::IllFormedProgram(format!(
                        "initial index {i} out of bounds for {}",
                        v.name
                    )));
                }
                store[base + i] = val.clone();
            }
        }
        let regs: Box<[Value]> = prog.regs.iter().map(|r| r.init.clone()).collect();
        let procs = (0..n)
            .map(|_| Proc {
                inv: None,
                pc: 0,
                strands: None,
                regs: regs.clone(),
            })
            .collect();
        let initial = Config {
            calls: 0,
            procs,
            store: store.into(),
        };
        let live = Arc::new(prog.live_registers());
        Ok(Semantics {
            prog,
            spec: spec.clone(),
            n,
            k,
            invocations,
            entries,
            offsets,
            lens,
            initial,
            live,
        })
    }

    pub fn invocations(&self) -> &[(&'static str, Val)] {
        &self.invocations
    }

    /// Pending invocation of process `p` (zero-based).
    pub fn pending_invocation(&self, cfg: &Config, p: usize) -> Option<(&'static str, Val)> {
        cfg.procs[p].inv.map(|i| self.invocations[i as usize])
    }

    /// Value at `var[index]`, looking the variable up by name.
    pub fn read(&self, cfg: &Config, var: &str, index: usize) -> Option<Value> {
        let v = self.prog.var_id(var)? as usize;
        (index < self.lens[v]).then(|| cfg.store[self.offsets[v] + index].clone())
    }

    pub fn var_len(&self, var: &str) -> Option<usize> {
        Some(self.lens[self.prog.var_id(var)? as usize])
    }

    pub fn reg(&self, cfg: &Config, p: usize, reg: &str) -> Option<Value> {
        Some(cfg.procs[p].regs[self.prog.reg_id(reg)? as usize].clone())
    }

    /// Label of the next instruction of process `p` (main strand), if pending.
    pub fn label(&self, cfg: &Config, p: usize) -> Option<&'static str> {
        let pr = &cfg.procs[p];
        pr.inv.map(|_| self.prog.code[pr.pc as usize].label)
    }

    /// Resets registers that no position of `pr` can still read, so that
    /// states differing only in stale values coincide.
    fn clear_dead(&self, pr: &mut Proc) {
        let main = &self.live[pr.pc as usize];
        for (r, decl) in self.prog.regs.iter().enumerate() {
            let live = main[r]
                || pr
                    .strands
                    .is_some_and(|st| st.iter().any(|&s| self.live[s as usize][r]));
            if !live && pr.regs[r] != decl.init {
                pr.regs[r] = decl.init.clone();
            }
        }
    }

    fn flat(&self, loc: &Loc, regs: &[Value], p: usize, inv: u8) -> Result<usize> {
        let v = loc.var as usize;
        let idx = match &loc.index {
            None => 0,
            Some(e) => self.eval(e, regs, p, inv)?.index()?,
        };
        if idx >= self.lens[v] {
            return Err(Error::IllFormedProgram(format!(
                "{}: index {idx} out of bounds for {} (length {})",
                self.prog.name, self.prog.vars[v].name, self.lens[v]
            )));
        }
        Ok(self.offsets[v] + idx)
    }

    fn eval(&self, e: &Expr, regs: &[Value], p: usize, inv: u8) -> Result<Value> {
        let ev = |e: &Expr| self.eval(e, regs, p, inv);
        let ints =
            |a: &Expr, b: &Expr| -> Result<(i64, i64)> { Ok((ev(a)?.int()?, ev(b)?.int()?)) };
        Ok(match e {
            Expr::Const(v) => v.clone(),
            Expr::Reg(r) => regs[*r as usize].clone(),
            Expr::Arg => Value::Data(self.invocations[inv as usize].1),
            Expr::Pid => Value::Int(p as i64),
            Expr::N => Value::Int(self.n as i64),
            Expr::Add(a, b) => {
                let (x, y) = ints(a, b)?;
                Value::Int(x + y)
            }
            Expr::Sub(a, b) => {
                let (x, y) = ints(a, b)?;
                Value::Int(x - y)
            }
            Expr::Mod(a, b) => {
                let (x, y) = ints(a, b)?;
                if y == 0 {
                    return Err(Error::IllFormedProgram("modulo by zero".into()));
                }
                Value::Int(x.rem_euclid(y))
            }
            Expr::Eq(a, b) => Value::Bool(ev(a)? == ev(b)?),
            Expr::Ne(a, b) => Value::Bool(ev(a)? != ev(b)?),
            Expr::Lt(a, b) => Value::Bool(match (ev(a)?, ev(b)?) {
                (Value::Int(x), Value::Int(y)) => x < y,
                (Value::Int(_), Value::Top) => true,
                (Value::Top, Value::Int(_) | Value::Top) => false,
                (x, y) => return Err(Error::IllFormedProgram(format!("cannot compare {x} < {y}"))),
            }),
            Expr::Not(a) => Value::Bool(!ev(a)?.bool()?),
            Expr::And(a, b) => Value::Bool(ev(a)?.bool()? && ev(b)?.bool()?),
            Expr::Or(a, b) => Value::Bool(ev(a)?.bool()? || ev(b)?.bool()?),
            Expr::If(c, a, b) => {
                if ev(c)?.bool()? {
                    ev(a)?
                } else {
                    ev(b)?
                }
            }
            Expr::Field(a, i) => match ev(a)? {
                Value::Tuple(t) => t
                    .get(*i)
                    .cloned()
                    .ok_or_else(|| Error::IllFormedProgram(format!("tuple has no field {i}")))?,
                other => {
                    return Err(Error::IllFormedProgram(format!(
                        "field {i} of non-tuple {other}"
                    )))
                }
            },
            Expr::Tuple(items) => {
                Value::Tuple(items.iter().map(ev).collect::<Result<Vec<_>>>()?.into())
            }
        })
    }

    /// Runs the instruction at `pc` for process `p`; `strand` selects which
    /// strand's position is advanced.
    fn step_at(
        &self,
        cfg: &Config,
        p: usize,
        strand: Option<usize>,
        out: &mut Vec<(Action, Config)>,
    ) -> Result<()> {
        let pr = &cfg.procs[p];
        let inv = pr.inv.expect("stepping an idle process");
        let pc = match strand {
            None => pr.pc,
            Some(s) => pr.strands.expect("strand without par")[s],
        };
        let ins = &self.prog.code[pc as usize];
        let pid = p as u8 + 1;
        let regs = &pr.regs;
        let ill = |msg: &str| {
            Error::IllFormedProgram(format!("{}: {} ({msg})", self.prog.name, ins.label))
        };

        // Each effect: register writes, store writes, new strands.
        type Effect = (Vec<(u16, Value)>, Vec<(usize, Value)>, Option<[Pc; 2]>);
        let effects: Vec<Effect> = match &ins.cmd {
            Command::Return(e) => {
                if strand.is_some() {
                    return Err(ill("return inside a strand"));
                }
                let v = match self.eval(e, regs, p, inv)? {
                    Value::Data(v) => v,
                    other => return Err(ill(&format!("returns non-data value {other}"))),
                };
                let (m, _) = self.invocations[inv as usize];
                let mut next = cfg.clone();
                let np = &mut next.procs[p];
                np.inv = None;
                np.pc = 0;
                np.strands = None;
                for (r, decl) in np.regs.iter_mut().zip(&self.prog.regs) {
                    if !decl.persistent {
                        *r = decl.init.clone();
                    }
                }
                out.push((Action::ret(pid, m, v), next));
                return Ok(());
            }
            Command::Join => return Err(ill("join executed as a step")),
            Command::Skip => vec![(Vec::new(), Vec::new(), None)],
            Command::Read { loc, dst } => {
                let at = self.flat(loc, regs, p, inv)?;
                vec![(vec![(*dst, cfg.store[at].clone())], Vec::new(), None)]
            }
            Command::Write { loc, val } => {
                let at = self.flat(loc, regs, p, inv)?;
                vec![(Vec::new(), vec![(at, self.eval(val, regs, p, inv)?)], None)]
            }
            Command::Cas { loc, old, new, dst } => {
                let at = self.flat(loc, regs, p, inv)?;
                let hit = cfg.store[at] == self.eval(old, regs, p, inv)?;
                let writes = if hit {
                    vec![(at, self.eval(new, regs, p, inv)?)]
                } else {
                    Vec::new()
                };
                let rw = dst.map(|d| vec![(d, Value::Bool(hit))]).unwrap_or_default();
                vec![(rw, writes, None)]
            }
            Command::GetAndInc { loc, dst } => {
                let at = self.flat(loc, regs, p, inv)?;
                let old = cfg.store[at].int()?;
                vec![(
                    vec![(*dst, Value::Int(old))],
                    vec![(at, Value::Int(old + 1))],
                    None,
                )]
            }
            Command::Swap { loc, val, dst } => {
                let at = self.flat(loc, regs, p, inv)?;
                let new = self.eval(val, regs, p, inv)?;
                vec![(vec![(*dst, cfg.store[at].clone())], vec![(at, new)], None)]
            }
            Command::Nondet { choices, dst } => choices
                .iter()
                .map(|c| Ok((vec![(*dst, self.eval(c, regs, p, inv)?)], Vec::new(), None)))
                .collect::<Result<Vec<_>>>()?,
            Command::GetPid { dst } => vec![(vec![(*dst, Value::Int(p as i64))], Vec::new(), None)],
            Command::Atomic {
                obj,
                args,
                dst,
                var_base,
            } => {
                let args = args
                    .iter()
                    .map(|a| self.eval(a, regs, p, inv))
                    .collect::<Result<Vec<_>>>()?;
                let (m, a) = self.invocations[inv as usize];
                let ctx = AtomicCtx {
                    store: &cfg.store,
                    offsets: &self.offsets,
                    lens: &self.lens,
                    base: *var_base,
                    pid: p,
                    n: self.n,
                    k: self.k,
                    method: m,
                    arg: a,
                    spec: &self.spec,
                };
                let outcomes = (obj.f)(&ctx, &args)?;
                let mut effects = Vec::with_capacity(outcomes.len());
                for o in outcomes {
                    let mut writes = Vec::with_capacity(o.writes.len());
                    for (v, i, val) in o.writes {
                        let v = (v + var_base) as usize;
                        if i >= self.lens[v] {
                            return Err(ill(&format!("atomic {} writes out of bounds", obj.name)));
                        }
                        writes.push((self.offsets[v] + i, val));
                    }
                    let rw = dst.map(|d| vec![(d, o.ret)]).unwrap_or_default();
                    effects.push((rw, writes, None));
                }
                effects
            }
            Command::Par { left, right } => {
                if strand.is_some() {
                    return Err(ill("nested par"));
                }
                vec![(Vec::new(), Vec::new(), Some([*left, *right]))]
            }
        };

        let action = Action::internal(pid, ins.label);
        for (rw, sw, strands) in effects {
            let mut next = cfg.clone();
            for (at, v) in sw {
                next.store[at] = v;
            }
            let np = &mut next.procs[p];
            for (r, v) in rw {
                np.regs[r as usize] = v;
            }
            let mut target = pc + 1;
            for arm in &ins.arms {
                let take = match &arm.cond {
                    None => true,
                    Some(c) => self.eval(c, &np.regs, p, inv)?.bool()?,
                };
                if take {
                    let vals = arm
                        .assigns
                        .iter()
                        .map(|(r, e)| Ok((*r, self.eval(e, &np.regs, p, inv)?)))
                        .collect::<Result<Vec<_>>>()?;
                    for (r, v) in vals {
                        np.regs[r as usize] = v;
                    }
                    target = arm.target;
                    break;
                }
            }
            match strand {
                None => np.pc = target,
                Some(s) => np.strands.as_mut().expect("strand without par")[s] = target,
            }
            if strands.is_some() {
                np.strands = strands;
            }
            self.clear_dead(np);
            out.push((action, next));
        }
        Ok(())
    }
}

impl Lts for Semantics {
    type State = Config;

    fn initial(&self) -> Config {
        self.initial.clone()
    }

    fn successors(&self, cfg: &Config) -> Result<Vec<(Action, Config)>> {
        let mut out = Vec::new();
        for p in 0..self.n {
            let pr = &cfg.procs[p];
            match pr.inv {
                None => {
                    for (i, &(m, a)) in self.invocations.iter().enumerate() {
                        let mut next = cfg.clone();
                        next.calls = next.calls.saturating_add(1);
                        let np = &mut next.procs[p];
                        np.inv = Some(i as u8);
                        np.pc = self.entries[i];
                        out.push((Action::call(p as u8 + 1, m, a), next));
                    }
                }
                Some(_) => match pr.strands {
                    None => self.step_at(cfg, p, None, &mut out)?,
                    Some(st) => {
                        let done =
                            st.map(|pc| matches!(self.prog.code[pc as usize].cmd, Command::Join));
                        if done[0] && done[1] {
                            let mut next = cfg.clone();
                            next.procs[p].strands = None;
                            self.clear_dead(&mut next.procs[p]);
                            out.push((Action::internal(p as u8 + 1, "join"), next));
                        } else {
                            for s in 0..2 {
                                if !done[s] {
                                    self.step_at(cfg, p, Some(s), &mut out)?;
                                }
                            }
                        }
                    }
                },
            }
        }
        Ok(out)
    }

    fn call_count(&self, cfg: &Config) -> usize {
        cfg.calls as usize
    }
}
