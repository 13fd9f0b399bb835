//! Concurrent objects as programs over a small shared-memory command IR,
//! their semantics under the most general client, mutations, and bounded
//! liveness checks.

mod ir;
mod liveness;
mod registry;
mod semantics;

pub use ir::{
    ex, goto, intern, when, Arm, ArmSpec, AtomicCtx, AtomicFn, AtomicObj, BodyBuilder, Command,
    Dim, Expr, Goto, Instr, Loc, Outcome, Pc, Program, ProgramBuilder, RegDecl, RegId, Value,
    VarDecl, VarId,
};
pub use liveness::{classify_liveness, Lasso, Liveness, LivenessVerdict, PendingView};
pub use registry::{build_object, object_names, split_call, MUTATIONS};
pub use semantics::{Config, Proc, Semantics};

use std::sync::Arc;

use crate::lts::{explore, Bound, ReachGraph, Val};
use crate::seqspec::SeqSpec;
use crate::{Error, Result};

/// Builds ⟦prog, n⟧ and explores it under `bound`.
pub fn object_graph(
    prog: &Arc<Program>,
    spec: &SeqSpec,
    n: usize,
    bound: Bound,
) -> Result<ReachGraph<Config>> {
    let sem = Semantics::new(prog.clone(), spec, n, bound.max_calls)?;
    explore(&sem, bound)
}

/// Applies a named edit to a queue program with the labels E1–E3, D1–D4.
///
/// - `swap-E1-E2`: the enqueue writes `Q[i]` before reserving `i`, so it uses
///   the index left over from the process's previous enqueue (initially 0);
/// - `deq-skip-swap`: the dequeue reads `Q[j]` instead of swapping ⊥ in;
/// - `return-constant`: the dequeue always returns 1.
pub fn mutate(prog: &Program, mutation: &str) -> Result<Program> {
    let missing =
        |what: &str| Error::UnknownMutation(format!("{mutation} (no {what} in {})", prog.name));
    let mut p = prog.clone();
    match mutation {
        "swap-E1-E2" => {
            let e1 = p.find_label("enq", "E1").ok_or_else(|| missing("E1"))? as usize;
            let e2 = p.find_label("enq", "E2").ok_or_else(|| missing("E2"))? as usize;
            let Command::GetAndInc { dst, .. } = p.code[e1].cmd else {
                return Err(missing("getAndInc at E1"));
            };
            if !p.code[e1].arms.is_empty() || !p.code[e2].arms.is_empty() {
                return Err(missing("straight-line E1/E2"));
            }
            p.code.swap(e1, e2);
            let r = &mut p.regs[dst as usize];
            r.persistent = true;
            r.init = Value::Int(0);
        }
        "deq-skip-swap" => {
            let d3 = p.find_label("deq", "D3").ok_or_else(|| missing("D3"))? as usize;
            let Command::Swap { loc, dst, .. } = p.code[d3].cmd.clone() else {
                return Err(missing("swap at D3"));
            };
            p.code[d3].cmd = Command::Read { loc, dst };
        }
        "return-constant" => {
            let d4 = p.find_label("deq", "D4").ok_or_else(|| missing("D4"))? as usize;
            if !matches!(p.code[d4].cmd, Command::Return(_)) {
                return Err(missing("return at D4"));
            }
            p.code[d4].cmd = Command::Return(ex::val(Val::Int(1)));
        }
        other => return Err(Error::UnknownMutation(other.to_string())),
    }
    p.name = format!("{}:{mutation}", prog.name);
    p.validate()?;
    Ok(p)
}
