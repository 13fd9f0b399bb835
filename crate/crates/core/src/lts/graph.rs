use std::collections::{BTreeSet, VecDeque};

use rustc_hash::{FxHashMap, FxHashSet};
use serde_json::{json, Value as Json};

use super::{Action, Bound, Lts, StateEncode, StateId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TruncReason {
    /// The transition is a call beyond the call bound.
    CallBound,
    /// The transition would exceed the consecutive internal-step budget.
    InternalBudget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Truncated {
    pub src: StateId,
    pub action: Action,
    pub reason: TruncReason,
}

/// Explicit finite graph produced by [`explore`]. State 0 is the initial state.
#[derive(Clone, Debug)]
pub struct ReachGraph<S> {
    pub states: Vec<S>,
    pub calls: Vec<u32>,
    pub succ: Vec<Vec<(Action, StateId)>>,
    pub truncated: Vec<Truncated>,
    pub bound: Bound,
}

impl<S> ReachGraph<S> {
    pub fn initial(&self) -> StateId {
        0
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// True if some transition was cut by the internal budget. Checkers refuse
    /// such graphs because the cut changes the behaviour being checked.
    pub fn budget_truncated(&self) -> bool {
        self.truncated
            .iter()
            .any(|t| t.reason == TruncReason::InternalBudget)
    }

    pub fn require_complete(&self) -> Result<()> {
        if self.budget_truncated() {
            Err(Error::InternalBudgetExhausted {
                budget: self.bound.internal_budget,
            })
        } else {
            Ok(())
        }
    }

    pub fn predecessors(&self) -> Vec<Vec<(Action, StateId)>> {
        let mut pred = vec![Vec::new(); self.states.len()];
        for (s, edges) in self.succ.iter().enumerate() {
            for &(a, t) in edges {
                pred[t as usize].push((a, s as StateId));
            }
        }
        pred
    }

    /// Shortest action sequence from the initial state to every state, as a
    /// parent map (BFS over edges in stored order).
    pub fn bfs_parents(&self) -> Vec<Option<(StateId, Action)>> {
        let mut parent = vec![None; self.states.len()];
        let mut seen = vec![false; self.states.len()];
        let mut queue = VecDeque::from([0u32]);
        seen[0] = true;
        while let Some(s) = queue.pop_front() {
            for &(a, t) in &self.succ[s as usize] {
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    parent[t as usize] = Some((s, a));
                    queue.push_back(t);
                }
            }
        }
        parent
    }

    pub fn path_to(&self, parents: &[Option<(StateId, Action)>], mut s: StateId) -> Vec<Action> {
        let mut path = Vec::new();
        while let Some((p, a)) = parents[s as usize] {
            path.push(a);
            s = p;
        }
        path.reverse();
        path
    }

    /// Content hash of the graph structure, used to tell whether two witnesses
    /// talk about the same state space.
    pub fn fingerprint(&self) -> u64
    where
        S: StateEncode,
    {
        use std::hash::{Hash, Hasher};
        let mut h = rustc_hash::FxHasher::default();
        self.states.len().hash(&mut h);
        for (s, st) in self.states.iter().enumerate() {
            st.encode().hash(&mut h);
            for (a, t) in &self.succ[s] {
                a.hash(&mut h);
                t.hash(&mut h);
            }
        }
        h.finish()
    }

    pub fn to_json(&self) -> Json
    where
        S: StateEncode,
    {
        let states: Vec<Json> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| json!({"id": i, "payload": s.encode()}))
            .collect();
        let mut transitions = Vec::with_capacity(self.edge_count());
        for (s, edges) in self.succ.iter().enumerate() {
            for (a, t) in edges {
                transitions.push(json!([s, a, t]));
            }
        }
        let truncated: Vec<Json> = self
            .truncated
            .iter()
            .map(|t| {
                json!({
                    "src": t.src,
                    "action": t.action,
                    "reason": match t.reason {
                        TruncReason::CallBound => "call-bound",
                        TruncReason::InternalBudget => "internal-budget",
                    }
                })
            })
            .collect();
        json!({
            "initial": 0,
            "bound": {
                "max_calls": self.bound.max_calls,
                "internal_budget": self.bound.internal_budget,
            },
            "states": states,
            "transitions": transitions,
            "truncated": truncated,
        })
    }
}

/// A graph is itself an LTS over its state ids.
impl<S> Lts for ReachGraph<S> {
    type State = StateId;

    fn initial(&self) -> StateId {
        0
    }

    fn successors(&self, s: &StateId) -> Result<Vec<(Action, StateId)>> {
        Ok(self.succ[*s as usize].clone())
    }

    fn call_count(&self, s: &StateId) -> usize {
        self.calls[*s as usize] as usize
    }
}

/// Explores `lts` under `bound`.
///
/// Each state carries the least number of internal steps since the last
/// visible action over all paths reaching it. Calls beyond the call bound and
/// internal steps beyond the budget are recorded as truncated transitions.
pub fn explore<L: Lts>(lts: &L, bound: Bound) -> Result<ReachGraph<L::State>> {
    assert!(
        bound.max_calls > 0 && bound.internal_budget > 0,
        "bound components must be positive"
    );
    let mut ids: FxHashMap<L::State, StateId> = FxHashMap::default();
    let mut states = Vec::new();
    let mut calls = Vec::new();
    let mut succ: Vec<Vec<(Action, StateId)>> = Vec::new();
    let mut trunc: Vec<Vec<Truncated>> = Vec::new();
    let mut run: Vec<u32> = Vec::new();
    let mut queue = VecDeque::new();

    let init = lts.initial();
    ids.insert(init.clone(), 0);
    calls.push(lts.call_count(&init) as u32);
    states.push(init);
    succ.push(Vec::new());
    trunc.push(Vec::new());
    run.push(0);
    queue.push_back(0u32);

    while let Some(s) = queue.pop_front() {
        let su = s as usize;
        let here = run[su];
        let mut edges = Vec::new();
        let mut cut = Vec::new();
        for (a, t) in lts.successors(&states[su])? {
            if a.is_call() && calls[su] as usize >= bound.max_calls {
                cut.push(Truncated {
                    src: s,
                    action: a,
                    reason: TruncReason::CallBound,
                });
                continue;
            }
            let next_run = if a.is_visible() { 0 } else { here + 1 };
            if next_run as usize > bound.internal_budget {
                cut.push(Truncated {
                    src: s,
                    action: a,
                    reason: TruncReason::InternalBudget,
                });
                continue;
            }
            let id = match ids.get(&t) {
                Some(&id) => {
                    if next_run < run[id as usize] {
                        run[id as usize] = next_run;
                        queue.push_back(id);
                    }
                    id
                }
                None => {
                    let id = states.len() as StateId;
                    if states.len() >= bound.state_ceiling {
                        return Err(Error::BudgetExceeded {
                            ceiling: bound.state_ceiling,
                        });
                    }
                    ids.insert(t.clone(), id);
                    calls.push(lts.call_count(&t) as u32);
                    states.push(t);
                    succ.push(Vec::new());
                    trunc.push(Vec::new());
                    run.push(next_run);
                    queue.push_back(id);
                    id
                }
            };
            edges.push((a, id));
        }
        succ[su] = edges;
        trunc[su] = cut;
    }

    Ok(ReachGraph {
        states,
        calls,
        succ,
        truncated: trunc.into_iter().flatten().collect(),
        bound,
    })
}

/// All traces of finite paths from the initial state. Fails on cyclic graphs,
/// whose trace sets are infinite.
pub fn trace_set<S>(graph: &ReachGraph<S>) -> Result<BTreeSet<Vec<Action>>> {
    if has_cycle(graph) {
        return Err(Error::InfiniteTraceSet);
    }
    Ok(trace_set_upto(graph, usize::MAX))
}

/// Traces of length at most `max_len`.
pub fn trace_set_upto<S>(graph: &ReachGraph<S>, max_len: usize) -> BTreeSet<Vec<Action>> {
    let mut out = BTreeSet::new();
    let mut stack = vec![(0u32, Vec::new())];
    while let Some((s, trace)) = stack.pop() {
        if trace.len() < max_len {
            for &(a, t) in &graph.succ[s as usize] {
                let mut next = trace.clone();
                next.push(a);
                stack.push((t, next));
            }
        }
        out.insert(trace);
    }
    out
}

/// The set of call/return projections of all traces. Finite under a call
/// bound even when the graph has cycles.
pub fn history_set<S>(graph: &ReachGraph<S>) -> BTreeSet<Vec<Action>> {
    let mut seen: FxHashSet<(StateId, Vec<Action>)> = FxHashSet::default();
    let mut out = BTreeSet::new();
    let mut stack = vec![(0u32, Vec::new())];
    seen.insert((0, Vec::new()));
    while let Some((s, hist)) = stack.pop() {
        for &(a, t) in &graph.succ[s as usize] {
            let mut next = hist.clone();
            if a.is_visible() {
                next.push(a);
            }
            if seen.insert((t, next.clone())) {
                stack.push((t, next));
            }
        }
        out.insert(hist);
    }
    out
}

fn has_cycle<S>(graph: &ReachGraph<S>) -> bool {
    // Kahn's algorithm: a cycle exists iff not every state gets removed.
    let n = graph.states.len();
    let mut indeg = vec![0usize; n];
    for edges in &graph.succ {
        for &(_, t) in edges {
            indeg[t as usize] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&s| indeg[s] == 0).collect();
    let mut removed = 0;
    while let Some(s) = queue.pop() {
        removed += 1;
        for &(_, t) in &graph.succ[s] {
            indeg[t as usize] -= 1;
            if indeg[t as usize] == 0 {
                queue.push(t as usize);
            }
        }
    }
    removed < n
}
