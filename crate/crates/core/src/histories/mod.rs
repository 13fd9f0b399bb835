//! Histories, linearizations, and the linearizability and strong
//! linearizability checkers.

mod strong;

pub use strong::{
    check_strong_linearizability, validate_strong_function, StrongLinFunction, StrongOutcome,
    TraceTree, TreeNode, WitnessNode, WitnessTree,
};

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::lts::{Action, ReachGraph, StateId, Val};
use crate::search::min_path;
use crate::seqspec::{SeqSpec, SpecState};
use crate::{Error, Result};

pub type Oid = u32;

/// One operation of a history. `ret == None` means the operation is pending.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct OpRecord {
    pub oid: Oid,
    pub pid: u8,
    pub method: &'static str,
    #[serde(serialize_with = "ser_val")]
    pub arg: Val,
    #[serde(serialize_with = "ser_opt_val")]
    pub ret: Option<Val>,
}

fn ser_val<S: serde::Serializer>(v: &Val, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn ser_opt_val<S: serde::Serializer>(
    v: &Option<Val>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_str(&v.to_string()),
        None => s.serialize_str("pending"),
    }
}

impl std::fmt::Display for OpRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.ret {
            Some(r) => write!(f, "{}({})⇒{}", self.method, self.arg, r),
            None => write!(f, "{}({})⇒?", self.method, self.arg),
        }
    }
}

/// A well-formed sequence of call and return actions. Operation ids are
/// assigned in call order, starting at 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct History {
    actions: Vec<Action>,
    oids: Vec<Oid>,
}

impl History {
    /// Builds a history from a trace; internal actions are dropped.
    pub fn new(trace: &[Action]) -> Result<History> {
        let mut actions = Vec::new();
        let mut oids = Vec::new();
        let mut open: BTreeMap<u8, (&'static str, Oid)> = BTreeMap::new();
        let mut next_oid = 1;
        for a in trace.iter().filter(|a| a.is_visible()) {
            if a.is_call() {
                if open.contains_key(&a.pid) {
                    return Err(Error::MalformedHistory(format!(
                        "P{} calls while an operation is pending",
                        a.pid
                    )));
                }
                open.insert(a.pid, (a.method, next_oid));
                oids.push(next_oid);
                next_oid += 1;
            } else {
                match open.remove(&a.pid) {
                    Some((m, oid)) if m == a.method => oids.push(oid),
                    Some((m, _)) => {
                        return Err(Error::MalformedHistory(format!(
                            "P{} returns from {} while {} is pending",
                            a.pid, a.method, m
                        )))
                    }
                    None => {
                        return Err(Error::MalformedHistory(format!(
                            "P{} returns with nothing pending",
                            a.pid
                        )))
                    }
                }
            }
            actions.push(*a);
        }
        Ok(History { actions, oids })
    }

    pub fn empty() -> History {
        History {
            actions: Vec::new(),
            oids: Vec::new(),
        }
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn oids(&self) -> &[Oid] {
        &self.oids
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Operations in oid order.
    pub fn ops(&self) -> Vec<OpRecord> {
        self.op_spans().into_iter().map(|(o, _, _)| o).collect()
    }

    /// Operations with the positions of their call and (if any) return.
    fn op_spans(&self) -> Vec<(OpRecord, usize, Option<usize>)> {
        let mut out: Vec<(OpRecord, usize, Option<usize>)> = Vec::new();
        for (i, (a, &oid)) in self.actions.iter().zip(&self.oids).enumerate() {
            if a.is_call() {
                out.push((
                    OpRecord {
                        oid,
                        pid: a.pid,
                        method: a.method,
                        arg: a.payload,
                        ret: None,
                    },
                    i,
                    None,
                ));
            } else {
                let slot = &mut out[oid as usize - 1];
                slot.0.ret = Some(a.payload);
                slot.2 = Some(i);
            }
        }
        out
    }

    pub fn to_json(&self) -> Json {
        let ops = self.ops();
        json!({"actions": self.actions, "ops": ops})
    }
}

/// The order `o1 < o2` iff `o1` returns before `o2` is called, restricted to
/// completed operations.
pub fn happen_before(h: &History) -> BTreeSet<(Oid, Oid)> {
    let spans = h.op_spans();
    let mut out = BTreeSet::new();
    for (a, _, ra) in &spans {
        for (b, cb, rb) in &spans {
            if let (Some(ra), Some(_)) = (ra, rb) {
                if ra < cb {
                    out.insert((a.oid, b.oid));
                }
            }
        }
    }
    out
}

/// A sequence of completed operations accepted by a specification.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Linearization {
    pub ops: Vec<OpRecord>,
}

impl Linearization {
    pub fn is_prefix_of(&self, other: &Linearization) -> bool {
        self.ops.len() <= other.ops.len() && self.ops.iter().zip(&other.ops).all(|(a, b)| a == b)
    }

    pub fn oids(&self) -> Vec<Oid> {
        self.ops.iter().map(|o| o.oid).collect()
    }
}

impl std::fmt::Display for Linearization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ops.is_empty() {
            return f.write_str("ε");
        }
        let parts: Vec<String> = self.ops.iter().map(|o| o.to_string()).collect();
        f.write_str(&parts.join("·"))
    }
}

struct LinProblem {
    ops: Vec<OpRecord>,
    /// Bitmask of operations that must precede each operation.
    pred: Vec<u64>,
    completed: u64,
}

impl LinProblem {
    fn new(h: &History) -> LinProblem {
        let spans = h.op_spans();
        assert!(spans.len() <= 64, "histories are limited to 64 operations");
        let mut pred = vec![0u64; spans.len()];
        let mut completed = 0u64;
        for (i, (_, ci, _)) in spans.iter().enumerate() {
            for (j, (_, _, rj)) in spans.iter().enumerate() {
                if rj.is_some_and(|rj| rj < *ci) {
                    pred[i] |= 1 << j;
                }
            }
        }
        for (i, (o, _, _)) in spans.iter().enumerate() {
            if o.ret.is_some() {
                completed |= 1 << i;
            }
        }
        LinProblem {
            ops: spans.into_iter().map(|(o, _, _)| o).collect(),
            pred,
            completed,
        }
    }

    /// Depth-first enumeration in lexicographic oid order. `emit` returns
    /// false to stop. Returns false if stopped early.
    fn search(
        &self,
        spec: &SeqSpec,
        state: &SpecState,
        used: u64,
        seq: &mut Vec<OpRecord>,
        dead: &mut FxHashSet<(SpecState, u64)>,
        emit: &mut dyn FnMut(&[OpRecord]) -> bool,
    ) -> (bool, bool) {
        // Returns (continue, found_any).
        let mut found = false;
        if used & self.completed == self.completed {
            found = true;
            if !emit(seq) {
                return (false, true);
            }
        }
        if dead.contains(&(state.clone(), used)) {
            return (true, found);
        }
        for (i, o) in self.ops.iter().enumerate() {
            let bit = 1u64 << i;
            if used & bit != 0 || self.pred[i] & !used != 0 {
                continue;
            }
            let (ret, next) = spec.step(state, o.method, o.arg);
            if o.ret.is_some_and(|r| r != ret) {
                continue;
            }
            seq.push(OpRecord {
                ret: Some(ret),
                ..*o
            });
            let (cont, f) = self.search(spec, &next, used | bit, seq, dead, emit);
            seq.pop();
            found |= f;
            if !cont {
                return (false, found);
            }
        }
        if !found {
            dead.insert((state.clone(), used));
        }
        (true, found)
    }
}

/// All linearizations of `h`: every completed operation plus any subset of
/// pending ones, ordered consistently with happen-before, accepted by `spec`.
/// Return values of included pending operations are the ones the sequential specification forces.
/// Output is in lexicographic order of oid sequences.
pub fn enumerate_linearizations(h: &History, spec: &SeqSpec) -> Vec<Linearization> {
    let p = LinProblem::new(h);
    let mut out = Vec::new();
    let mut dead = FxHashSet::default();
    p.search(
        spec,
        &spec.initial,
        0,
        &mut Vec::new(),
        &mut dead,
        &mut |s| {
            out.push(Linearization { ops: s.to_vec() });
            true
        },
    );
    out
}

/// First linearization in lexicographic oid order, or `None`.
pub fn is_linearizable(h: &History, spec: &SeqSpec) -> Option<Linearization> {
    let p = LinProblem::new(h);
    let mut out = None;
    let mut dead = FxHashSet::default();
    p.search(
        spec,
        &spec.initial,
        0,
        &mut Vec::new(),
        &mut dead,
        &mut |s| {
            out = Some(Linearization { ops: s.to_vec() });
            false
        },
    );
    out
}

#[derive(Clone, Debug)]
pub enum LinVerdict {
    /// Every history at the bound is linearizable.
    Linearizable { histories: usize },
    /// Minimal trace whose history has no linearization.
    Counterexample {
        trace: Vec<Action>,
        history: History,
    },
}

impl LinVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, LinVerdict::Linearizable { .. })
    }
}

/// Runs [`is_linearizable`] on the history of every trace of `graph`.
///
/// Traces are folded by (end state, history), which is all the check depends
/// on. On failure the reported trace is minimal by visible count, length, then
/// action order.
pub fn check_object_linearizable<S>(graph: &ReachGraph<S>, spec: &SeqSpec) -> Result<LinVerdict> {
    graph.require_complete()?;
    type Node = (StateId, Rc<[Action]>);
    let mut verdicts: FxHashMap<Rc<[Action]>, bool> = FxHashMap::default();
    let mut check = |h: &Rc<[Action]>| -> Result<bool> {
        if let Some(&v) = verdicts.get(h) {
            return Ok(v);
        }
        let v = is_linearizable(&History::new(h)?, spec).is_some();
        verdicts.insert(h.clone(), v);
        Ok(v)
    };
    let step = |(s, h): &Node| -> Vec<(Action, Node)> {
        graph.succ[*s as usize]
            .iter()
            .map(|&(a, t)| {
                let h2: Rc<[Action]> = if a.is_visible() {
                    let mut v = h.to_vec();
                    v.push(a);
                    v.into()
                } else {
                    h.clone()
                };
                (a, (t, h2))
            })
            .collect()
    };

    let start: Node = (0, Rc::from(Vec::new()));
    let mut seen: FxHashSet<Node> = FxHashSet::default();
    let mut stack = vec![start.clone()];
    seen.insert(start.clone());
    let mut failing = false;
    while let Some(node) = stack.pop() {
        if !check(&node.1)? {
            // Linearizability is prefix closed, so extensions fail too.
            failing = true;
            continue;
        }
        for (_, next) in step(&node) {
            if seen.insert(next.clone()) {
                stack.push(next);
            }
        }
    }
    if !failing {
        let histories = verdicts.len();
        return Ok(LinVerdict::Linearizable { histories });
    }
    let (trace, (_, h)) = min_path(start, step, |(_, h)| verdicts.get(h) == Some(&false))
        .expect("a failing history was found by the exhaustive pass");
    Ok(LinVerdict::Counterexample {
        trace,
        history: History::new(&h)?,
    })
}
