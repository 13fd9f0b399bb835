use std::fmt;
use std::sync::Arc;

use crate::histories::OpRecord;
use crate::lts::{Action, Val};
use crate::seqspec::SeqSpec;
use crate::{Error, Result};

pub type VarId = u16;
pub type RegId = u16;
pub type Pc = u16;

/// Contents of a shared location or register.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Null,
    Bot,
    /// Larger than every integer.
    Top,
    Bool(bool),
    Int(i64),
    Data(Val),
    /// History recorder content: visible actions tagged with operation ids.
    Hist(Arc<[(Action, u32)]>),
    Lin(Arc<[OpRecord]>),
    Seq(Arc<[Val]>),
    Tuple(Arc<[Value]>),
}

impl Value {
    pub fn int(&self) -> Result<i64> {
        match self {
            Value::Int(i) => Ok(*i),
            other => Err(Error::IllFormedProgram(format!(
                "expected an integer, found {other}"
            ))),
        }
    }

    pub fn bool(&self) -> Result<bool> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(Error::IllFormedProgram(format!(
                "expected a boolean, found {other}"
            ))),
        }
    }

    pub fn index(&self) -> Result<usize> {
        let i = self.int()?;
        usize::try_from(i).map_err(|_| Error::IllFormedProgram(format!("negative index {i}")))
    }

    pub fn tuple(items: Vec<Value>) -> Value {
        Value::Tuple(items.into())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Bot => f.write_str("⊥"),
            Value::Top => f.write_str("⊤"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Data(v) => write!(f, "'{v}"),
            Value::Hist(h) => {
                f.write_str("h[")?;
                for (i, (a, oid)) in h.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}#{oid}")?;
                }
                f.write_str("]")
            }
            Value::Lin(l) => {
                f.write_str("l[")?;
                for (i, o) in l.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{o}#{}", o.oid)?;
                }
                f.write_str("]")
            }
            Value::Seq(s) => {
                f.write_str("s[")?;
                for (i, v) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Tuple(t) => {
                f.write_str("(")?;
                for (i, v) in t.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Const(Value),
    Reg(RegId),
    /// Argument of the pending invocation.
    Arg,
    /// Zero-based index of the executing process.
    Pid,
    /// Number of processes.
    N,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mod(Box<Expr>, Box<Expr>),
    Eq(Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
    /// Integer order with `Top` above every integer.
    Lt(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Field(Box<Expr>, usize),
    Tuple(Vec<Expr>),
}

/// Shorthands for building expressions.
pub mod ex {
    use super::{Expr, RegId, Value};
    use crate::lts::Val;

    pub fn r(reg: RegId) -> Expr {
        Expr::Reg(reg)
    }
    pub fn int(i: i64) -> Expr {
        Expr::Const(Value::Int(i))
    }
    pub fn val(v: Val) -> Expr {
        Expr::Const(Value::Data(v))
    }
    pub fn c(v: Value) -> Expr {
        Expr::Const(v)
    }
    pub fn bool(b: bool) -> Expr {
        Expr::Const(Value::Bool(b))
    }
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }
    pub fn modulo(a: Expr, b: Expr) -> Expr {
        Expr::Mod(Box::new(a), Box::new(b))
    }
    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::Eq(Box::new(a), Box::new(b))
    }
    pub fn ne(a: Expr, b: Expr) -> Expr {
        Expr::Ne(Box::new(a), Box::new(b))
    }
    pub fn lt(a: Expr, b: Expr) -> Expr {
        Expr::Lt(Box::new(a), Box::new(b))
    }
    pub fn not(a: Expr) -> Expr {
        Expr::Not(Box::new(a))
    }
    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }
    pub fn ite(c: Expr, a: Expr, b: Expr) -> Expr {
        Expr::If(Box::new(c), Box::new(a), Box::new(b))
    }
    pub fn field(a: Expr, i: usize) -> Expr {
        Expr::Field(Box::new(a), i)
    }
    pub fn tuple(items: Vec<Expr>) -> Expr {
        Expr::Tuple(items)
    }
}

impl Expr {
    /// Calls `f` on every register mentioned.
    pub(crate) fn visit_regs(&self, f: &mut dyn FnMut(RegId)) {
        match self {
            Expr::Reg(r) => f(*r),
            Expr::Const(_) | Expr::Arg | Expr::Pid | Expr::N => {}
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mod(a, b)
            | Expr::Eq(a, b)
            | Expr::Ne(a, b)
            | Expr::Lt(a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b) => {
                a.visit_regs(f);
                b.visit_regs(f);
            }
            Expr::Not(a) | Expr::Field(a, _) => a.visit_regs(f),
            Expr::If(c, a, b) => {
                c.visit_regs(f);
                a.visit_regs(f);
                b.visit_regs(f);
            }
            Expr::Tuple(items) => items.iter().for_each(|e| e.visit_regs(f)),
        }
    }

    /// Applies `f` to every register mentioned.
    pub(crate) fn map_regs(&mut self, f: &dyn Fn(RegId) -> RegId) {
        match self {
            Expr::Reg(r) => *r = f(*r),
            Expr::Const(_) | Expr::Arg | Expr::Pid | Expr::N => {}
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mod(a, b)
            | Expr::Eq(a, b)
            | Expr::Ne(a, b)
            | Expr::Lt(a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b) => {
                a.map_regs(f);
                b.map_regs(f);
            }
            Expr::Not(a) | Expr::Field(a, _) => a.map_regs(f),
            Expr::If(c, a, b) => {
                c.map_regs(f);
                a.map_regs(f);
                b.map_regs(f);
            }
            Expr::Tuple(items) => items.iter_mut().for_each(|e| e.map_regs(f)),
        }
    }
}

/// A shared location: a variable, indexed when the variable is an array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loc {
    pub var: VarId,
    pub index: Option<Expr>,
}

impl Loc {
    pub fn var(var: VarId) -> Loc {
        Loc { var, index: None }
    }

    pub fn at(var: VarId, index: Expr) -> Loc {
        Loc {
            var,
            index: Some(index),
        }
    }
}

/// Length of a shared variable, resolved against the process count `n` and
/// call bound `k` when the semantics is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    One,
    Fixed(usize),
    /// One slot per process.
    PerProc,
    /// `k + 1` slots: one per operation id plus slot 0.
    PerCall,
    /// `k` slots per process, laid out process-major.
    PerProcCall,
}

impl Dim {
    pub fn len(self, n: usize, k: usize) -> usize {
        match self {
            Dim::One => 1,
            Dim::Fixed(m) => m,
            Dim::PerProc => n,
            Dim::PerCall => k + 1,
            Dim::PerProcCall => n * k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub dim: Dim,
    pub init: Value,
    /// Overrides of the initial value at given indices.
    pub init_at: Vec<(usize, Value)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegDecl {
    pub name: String,
    pub init: Value,
    /// Keeps its value between operations of the same process instead of
    /// being reset at each call.
    pub persistent: bool,
}

/// Read-only view of the store handed to atomic objects. Variable ids are
/// relative to the program that defined the object.
pub struct AtomicCtx<'a> {
    pub(crate) store: &'a [Value],
    pub(crate) offsets: &'a [usize],
    pub(crate) lens: &'a [usize],
    pub(crate) base: VarId,
    pub pid: usize,
    pub n: usize,
    pub k: usize,
    pub method: &'static str,
    pub arg: Val,
    pub spec: &'a SeqSpec,
}

impl AtomicCtx<'_> {
    pub fn get(&self, var: VarId, index: usize) -> Result<&Value> {
        let v = (var + self.base) as usize;
        if index >= self.lens[v] {
            return Err(Error::IllFormedProgram(format!(
                "index {index} out of bounds for variable {v}"
            )));
        }
        Ok(&self.store[self.offsets[v] + index])
    }

    pub fn len(&self, var: VarId) -> usize {
        self.lens[(var + self.base) as usize]
    }
}

/// One possible effect of an atomic object call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub ret: Value,
    pub writes: Vec<(VarId, usize, Value)>,
}

pub type AtomicFn = dyn Fn(&AtomicCtx<'_>, &[Value]) -> Result<Vec<Outcome>> + Send + Sync;

/// A composite object whose methods take effect in one step (consensus,
/// history recorder, id generator and similar helpers).
#[derive(Clone)]
pub struct AtomicObj {
    pub name: &'static str,
    pub f: Arc<AtomicFn>,
}

impl fmt::Debug for AtomicObj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AtomicObj({})", self.name)
    }
}

impl PartialEq for AtomicObj {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && Arc::ptr_eq(&self.f, &other.f)
    }
}

impl Eq for AtomicObj {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Skip,
    Read {
        loc: Loc,
        dst: RegId,
    },
    Write {
        loc: Loc,
        val: Expr,
    },
    /// Stores whether the swap happened in `dst`.
    Cas {
        loc: Loc,
        old: Expr,
        new: Expr,
        dst: Option<RegId>,
    },
    GetAndInc {
        loc: Loc,
        dst: RegId,
    },
    Swap {
        loc: Loc,
        val: Expr,
        dst: RegId,
    },
    /// One successor per choice.
    Nondet {
        choices: Vec<Expr>,
        dst: RegId,
    },
    GetPid {
        dst: RegId,
    },
    Return(Expr),
    Atomic {
        obj: AtomicObj,
        args: Vec<Expr>,
        dst: Option<RegId>,
        var_base: VarId,
    },
    /// Runs two strands of the same process, interleaved, until both reach
    /// [`Command::Join`]; a `join` step then continues at the arm target.
    Par {
        left: Pc,
        right: Pc,
    },
    /// End of a strand. Never executed as a step.
    Join,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arm {
    pub cond: Option<Expr>,
    /// Evaluated simultaneously on the registers after the command ran.
    pub assigns: Vec<(RegId, Expr)>,
    pub target: Pc,
}

/// One atomic step. After the command runs, the first arm whose condition
/// holds applies its assignments and jumps; with no matching arm control
/// falls through to the next instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instr {
    pub label: &'static str,
    pub cmd: Command,
    pub arms: Vec<Arm>,
}

#[derive(Clone, Debug)]
pub struct Program {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub regs: Vec<RegDecl>,
    pub code: Vec<Instr>,
    /// Entry point per method name.
    pub methods: Vec<(&'static str, Pc)>,
}

impl Program {
    pub fn entry(&self, method: &str) -> Option<Pc> {
        self.methods
            .iter()
            .find(|(m, _)| *m == method)
            .map(|&(_, pc)| pc)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .map(|i| i as VarId)
    }

    pub fn reg_id(&self, name: &str) -> Option<RegId> {
        self.regs
            .iter()
            .position(|r| r.name == name)
            .map(|i| i as RegId)
    }

    pub fn method_names(&self) -> Vec<&'static str> {
        self.methods.iter().map(|&(m, _)| m).collect()
    }

    /// Position of the instruction labelled `label` within the body of `method`.
    pub fn find_label(&self, method: &str, label: &str) -> Option<Pc> {
        let entry = self.entry(method)? as usize;
        let end = self
            .methods
            .iter()
            .map(|&(_, pc)| pc as usize)
            .filter(|&pc| pc > entry)
            .min()
            .unwrap_or(self.code.len());
        (entry..end)
            .find(|&pc| self.code[pc].label == label)
            .map(|pc| pc as Pc)
    }

    /// Structural checks: targets in range, registers and variables declared,
    /// strands confined to one level.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::IllFormedProgram(format!("{}: {msg}", self.name)));
        if self.code.len() > Pc::MAX as usize {
            return bad("program too large".into());
        }
        for &(m, pc) in &self.methods {
            if pc as usize >= self.code.len() {
                return bad(format!("entry of {m} out of range"));
            }
        }
        for (pc, ins) in self.code.iter().enumerate() {
            for arm in &ins.arms {
                if arm.target as usize >= self.code.len() {
                    return bad(format!("{} at {pc} jumps out of range", ins.label));
                }
                for (r, _) in &arm.assigns {
                    if *r as usize >= self.regs.len() {
                        return bad(format!(
                            "{} at {pc} assigns undeclared register {r}",
                            ins.label
                        ));
                    }
                }
            }
            if ins.arms.is_empty()
                && pc + 1 >= self.code.len()
                && !matches!(ins.cmd, Command::Return(_) | Command::Join)
            {
                return bad(format!("{} at {pc} falls off the end", ins.label));
            }
            let loc_ok = |l: &Loc| (l.var as usize) < self.vars.len();
            let ok = match &ins.cmd {
                Command::Read { loc, dst }
                | Command::GetAndInc { loc, dst }
                | Command::Swap { loc, dst, .. } => {
                    loc_ok(loc) && (*dst as usize) < self.regs.len()
                }
                Command::Write { loc, .. } => loc_ok(loc),
                Command::Cas { loc, dst, .. } => {
                    loc_ok(loc) && dst.is_none_or(|d| (d as usize) < self.regs.len())
                }
                Command::Nondet { choices, dst } => {
                    !choices.is_empty() && (*dst as usize) < self.regs.len()
                }
                Command::GetPid { dst } => (*dst as usize) < self.regs.len(),
                Command::Atomic { dst, .. } => dst.is_none_or(|d| (d as usize) < self.regs.len()),
                Command::Par { left, right } => {
                    let (l, r) = (*left as usize, *right as usize);
                    l < self.code.len()
                        && r < self.code.len()
                        && !self.strand_has_par(l)
                        && !self.strand_has_par(r)
                }
                Command::Skip | Command::Return(_) | Command::Join => true,
            };
            if !ok {
                return bad(format!("{} at {pc} is malformed", ins.label));
            }
        }
        Ok(())
    }

    /// Registers that may be read before being overwritten, per position.
    /// Persistent registers are always live; a `Join` continues wherever any
    /// `Par` continues.
    pub fn live_registers(&self) -> Vec<Vec<bool>> {
        let nr = self.regs.len();
        let len = self.code.len();
        let mut live = vec![vec![false; nr]; len];
        let mark = |set: &mut Vec<bool>, e: &Expr| e.visit_regs(&mut |r| set[r as usize] = true);
        let loc_uses = |set: &mut Vec<bool>, l: &Loc| {
            if let Some(e) = &l.index {
                mark(set, e);
            }
        };
        loop {
            let mut join_live = vec![false; nr];
            for (pc, ins) in self.code.iter().enumerate() {
                if matches!(ins.cmd, Command::Par { .. }) && pc + 1 < len {
                    for r in 0..nr {
                        join_live[r] |= live[pc + 1][r];
                    }
                }
            }
            let mut changed = false;
            for pc in (0..len).rev() {
                let ins = &self.code[pc];
                let mut after = vec![false; nr];
                match &ins.cmd {
                    Command::Return(_) => {}
                    Command::Join => after.clone_from(&join_live),
                    cmd => {
                        for arm in &ins.arms {
                            let mut target = live[arm.target as usize].clone();
                            for (r, _) in &arm.assigns {
                                target[*r as usize] = false;
                            }
                            for (_, e) in &arm.assigns {
                                mark(&mut target, e);
                            }
                            if let Some(c) = &arm.cond {
                                mark(&mut target, c);
                            }
                            for r in 0..nr {
                                after[r] |= target[r];
                            }
                        }
                        if !ins.arms.iter().any(|a| a.cond.is_none()) && pc + 1 < len {
                            for r in 0..nr {
                                after[r] |= live[pc + 1][r];
                            }
                        }
                        if let Command::Par { left, right } = cmd {
                            for r in 0..nr {
                                after[r] |= live[*left as usize][r] || live[*right as usize][r];
                            }
                        }
                    }
                }
                let mut inn = after;
                let def = match &ins.cmd {
                    Command::Read { dst, .. }
                    | Command::GetAndInc { dst, .. }
                    | Command::Swap { dst, .. }
                    | Command::Nondet { dst, .. }
                    | Command::GetPid { dst } => Some(*dst),
                    Command::Cas { dst, .. } | Command::Atomic { dst, .. } => *dst,
                    _ => None,
                };
                if let Some(d) = def {
                    inn[d as usize] = false;
                }
                match &ins.cmd {
                    Command::Read { loc, .. } | Command::GetAndInc { loc, .. } => {
                        loc_uses(&mut inn, loc)
                    }
                    Command::Write { loc, val } | Command::Swap { loc, val, .. } => {
                        loc_uses(&mut inn, loc);
                        mark(&mut inn, val);
                    }
                    Command::Cas { loc, old, new, .. } => {
                        loc_uses(&mut inn, loc);
                        mark(&mut inn, old);
                        mark(&mut inn, new);
                    }
                    Command::Nondet { choices, .. } => {
                        choices.iter().for_each(|e| mark(&mut inn, e))
                    }
                    Command::Return(e) => mark(&mut inn, e),
                    Command::Atomic { args, .. } => args.iter().for_each(|e| mark(&mut inn, e)),
                    Command::Skip
                    | Command::GetPid { .. }
                    | Command::Par { .. }
                    | Command::Join => {}
                }
                for (r, decl) in self.regs.iter().enumerate() {
                    inn[r] |= decl.persistent;
                }
                if inn != live[pc] {
                    live[pc] = inn;
                    changed = true;
                }
            }
            if !changed {
                return live;
            }
        }
    }

    /// True if a `Par` is reachable from `start` before a `Join`.
    fn strand_has_par(&self, start: usize) -> bool {
        let mut seen = vec![false; self.code.len()];
        let mut stack = vec![start];
        while let Some(pc) = stack.pop() {
            if pc >= self.code.len() || std::mem::replace(&mut seen[pc], true) {
                continue;
            }
            match self.code[pc].cmd {
                Command::Par { .. } => return true,
                Command::Join | Command::Return(_) => continue,
                _ => {}
            }
            stack.extend(self.code[pc].arms.iter().map(|a| a.target as usize));
            if !self.code[pc].arms.iter().any(|a| a.cond.is_none()) {
                stack.push(pc + 1);
            }
        }
        false
    }
}

/// Jump target used while building a method body.
#[derive(Clone, Copy, Debug)]
pub enum Goto {
    Label(&'static str),
    /// Absolute position in the program being built.
    Abs(Pc),
}

#[derive(Clone, Debug)]
pub struct ArmSpec {
    pub cond: Option<Expr>,
    pub assigns: Vec<(RegId, Expr)>,
    pub target: Goto,
}

/// Arm taken when `cond` holds.
pub fn when(cond: Expr, target: &'static str) -> ArmSpec {
    ArmSpec {
        cond: Some(cond),
        assigns: Vec::new(),
        target: Goto::Label(target),
    }
}

/// Unconditional arm.
pub fn goto(target: &'static str) -> ArmSpec {
    ArmSpec {
        cond: None,
        assigns: Vec::new(),
        target: Goto::Label(target),
    }
}

impl ArmSpec {
    pub fn set(mut self, reg: RegId, e: Expr) -> ArmSpec {
        self.assigns.push((reg, e));
        self
    }
}

/// Builds a [`Program`]: declares variables and registers, then method
/// bodies whose arms refer to labels within the same body.
pub struct ProgramBuilder {
    prog: Program,
}

pub struct BodyBuilder<'a> {
    prog: &'a mut Program,
    start: usize,
    pending: Vec<(usize, Vec<ArmSpec>)>,
}

impl ProgramBuilder {
    pub fn new(name: impl Into<String>) -> ProgramBuilder {
        ProgramBuilder {
            prog: Program {
                name: name.into(),
                vars: Vec::new(),
                regs: Vec::new(),
                code: Vec::new(),
                methods: Vec::new(),
            },
        }
    }

    pub fn var(&mut self, name: &str, dim: Dim, init: Value) -> VarId {
        self.var_with(name, dim, init, Vec::new())
    }

    pub fn var_with(
        &mut self,
        name: &str,
        dim: Dim,
        init: Value,
        init_at: Vec<(usize, Value)>,
    ) -> VarId {
        self.prog.vars.push(VarDecl {
            name: name.to_string(),
            dim,
            init,
            init_at,
        });
        (self.prog.vars.len() - 1) as VarId
    }

    pub fn reg(&mut self, name: &str) -> RegId {
        self.prog.regs.push(RegDecl {
            name: name.to_string(),
            init: Value::Null,
            persistent: false,
        });
        (self.prog.regs.len() - 1) as RegId
    }

    pub fn persistent_reg(&mut self, name: &str, init: Value) -> RegId {
        self.prog.regs.push(RegDecl {
            name: name.to_string(),
            init,
            persistent: true,
        });
        (self.prog.regs.len() - 1) as RegId
    }

    /// Builds one body shared by every method in `names`.
    pub fn body(
        &mut self,
        names: &[&'static str],
        f: impl FnOnce(&mut BodyBuilder<'_>),
    ) -> Result<()> {
        let start = self.prog.code.len();
        let mut b = BodyBuilder {
            prog: &mut self.prog,
            start,
            pending: Vec::new(),
        };
        f(&mut b);
        b.finish()?;
        for &m in names {
            self.prog.methods.push((m, start as Pc));
        }
        Ok(())
    }

    pub fn method(
        &mut self,
        name: &'static str,
        f: impl FnOnce(&mut BodyBuilder<'_>),
    ) -> Result<()> {
        self.body(&[name], f)
    }

    pub fn build(self) -> Result<Program> {
        self.prog.validate()?;
        Ok(self.prog)
    }
}

impl BodyBuilder<'_> {
    /// Appends an instruction; returns its absolute position.
    pub fn ins(&mut self, label: &'static str, cmd: Command, arms: Vec<ArmSpec>) -> Pc {
        let pc = self.prog.code.len();
        self.prog.code.push(Instr {
            label,
            cmd,
            arms: Vec::new(),
        });
        self.pending.push((pc, arms));
        pc as Pc
    }

    /// Position the next instruction will get.
    pub fn here(&self) -> Pc {
        self.prog.code.len() as Pc
    }

    fn finish(self) -> Result<()> {
        let BodyBuilder {
            prog,
            start,
            pending,
        } = self;
        for (pc, arms) in pending {
            let mut out = Vec::with_capacity(arms.len());
            for a in arms {
                let target = match a.target {
                    Goto::Abs(t) => t,
                    Goto::Label(l) => (start..prog.code.len())
                        .find(|&i| prog.code[i].label == l)
                        .ok_or_else(|| {
                            Error::IllFormedProgram(format!("{}: unknown label {l}", prog.name))
                        })? as Pc,
                };
                out.push(Arm {
                    cond: a.cond,
                    assigns: a.assigns,
                    target,
                });
            }
            prog.code[pc].arms = out;
        }
        Ok(())
    }
}

/// Interns a label so that renamed copies can live in `Action::label`.
pub fn intern(s: &str) -> &'static str {
    use std::collections::HashSet;
    use std::sync::{Mutex, OnceLock};
    static POOL: OnceLock<Mutex<HashSet<&'static str>>> = OnceLock::new();
    let mut pool = POOL
        .get_or_init(|| Mutex::new(HashSet::new()))
        .lock()
        .expect("label pool poisoned");
    if let Some(&l) = pool.get(s) {
        return l;
    }
    let l: &'static str = Box::leak(s.to_string().into_boxed_str());
    pool.insert(l);
    l
}
