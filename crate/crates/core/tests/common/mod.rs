//! Helpers shared by the integration tests: small hand-built graphs and
//! oracles that are deliberately independent of the library's algorithms.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use linsim::lts::{Action, Bound, ReachGraph, StateId, Val};
use linsim::objects::{build_object, object_graph, Config};
use linsim::seqspec::{default_values, queue_spec, SeqSpec};

pub fn queue() -> SeqSpec {
    queue_spec(&default_values())
}

pub fn object(name: &str, n: usize, k: usize) -> ReachGraph<Config> {
    let spec = queue();
    let prog = Arc::new(build_object(name, &spec).unwrap_or_else(|e| panic!("{name}: {e}")));
    object_graph(&prog, &spec, n, Bound::calls(k)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn enq(pid: u8, v: i64) -> Action {
    Action::call(pid, "enq", Val::Int(v))
}

pub fn ack(pid: u8) -> Action {
    Action::ret(pid, "enq", Val::Ack)
}

pub fn deq(pid: u8) -> Action {
    Action::call(pid, "deq", Val::Unit)
}

pub fn deq_ret(pid: u8, v: Val) -> Action {
    Action::ret(pid, "deq", v)
}

/// A graph over plain state numbers. Every state must be reachable from 0.
pub fn small_graph(succ: Vec<Vec<(Action, StateId)>>) -> ReachGraph<u32> {
    let n = succ.len();
    ReachGraph {
        states: (0..n as u32).collect(),
        calls: vec![0; n],
        succ,
        truncated: Vec::new(),
        bound: Bound::calls(1),
    }
}

/// Alphabet used by random graphs: two visible actions and two internal ones.
pub fn small_alphabet() -> [Action; 5] {
    [
        enq(1, 1),
        ack(1),
        deq(2),
        Action::internal(1, "t"),
        Action::internal(2, "u"),
    ]
}

/// Builds a graph with `n` states where state `i > 0` is entered from
/// `parents[i - 1] % i`, plus the extra edges `(from, action, to)`.
pub fn random_graph(
    n: usize,
    parents: &[(usize, usize)],
    extra: &[(usize, usize, usize)],
) -> ReachGraph<u32> {
    let alpha = small_alphabet();
    let mut succ: Vec<Vec<(Action, StateId)>> = vec![Vec::new(); n];
    for i in 1..n {
        let (p, a) = parents[i - 1];
        succ[p % i].push((alpha[a % alpha.len()], i as StateId));
    }
    for &(f, a, t) in extra {
        succ[f % n].push((alpha[a % alpha.len()], (t % n) as StateId));
    }
    for e in &mut succ {
        e.sort();
        e.dedup();
    }
    small_graph(succ)
}

fn tau_star<S>(g: &ReachGraph<S>, from: StateId) -> BTreeSet<StateId> {
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![from];
    while let Some(s) = stack.pop() {
        for &(a, t) in &g.succ[s as usize] {
            if !a.is_visible() && seen.insert(t) {
                stack.push(t);
            }
        }
    }
    seen
}

/// States reachable by τ*·a·τ* (or τ* when `a` is internal).
fn weak_after<S>(g: &ReachGraph<S>, from: StateId, a: &Action) -> BTreeSet<StateId> {
    let before = tau_star(g, from);
    if !a.is_visible() {
        return before;
    }
    let mut out = BTreeSet::new();
    for s in before {
        for &(b, t) in &g.succ[s as usize] {
            if b.is_visible() && b.same_visible(a) {
                out.extend(tau_star(g, t));
            }
        }
    }
    out
}

/// Greatest weak simulation by iterated pair removal, with visible steps
/// answered by τ*·a·τ*.
pub fn naive_simulates<SL, SR>(left: &ReachGraph<SL>, right: &ReachGraph<SR>) -> bool {
    let (nl, nr) = (left.len(), right.len());
    let mut rel = vec![vec![true; nr]; nl];
    loop {
        let mut changed = false;
        for l in 0..nl {
            for r in 0..nr {
                if !rel[l][r] {
                    continue;
                }
                let ok = left.succ[l].iter().all(|(a, l1)| {
                    weak_after(right, r as StateId, a)
                        .iter()
                        .any(|&r1| rel[*l1 as usize][r1 as usize])
                });
                if !ok {
                    rel[l][r] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return rel[0][0];
        }
    }
}

/// True if `path` (internal steps included) can be replayed from the initial
/// state of `g`.
pub fn replays<S>(g: &ReachGraph<S>, path: &[Action]) -> bool {
    let mut at: BTreeSet<StateId> = BTreeSet::from([0]);
    for a in path {
        at = at
            .iter()
            .flat_map(|&s| {
                g.succ[s as usize]
                    .iter()
                    .filter(|(b, _)| b == a)
                    .map(|&(_, t)| t)
            })
            .collect();
        if at.is_empty() {
            return false;
        }
    }
    true
}

struct Op {
    pid: u8,
    method: &'static str,
    arg: Val,
    ret: Option<Val>,
    inv: usize,
    res: usize,
}

/// Brute-force linearizability: try every subset of pending operations and
/// every order of the chosen operations, keeping orders that respect real
/// time and replay through the specification.
pub fn oracle_linearizable(history: &[Action], spec: &SeqSpec) -> bool {
    let mut ops: Vec<Op> = Vec::new();
    for (i, a) in history.iter().enumerate() {
        if a.is_call() {
            ops.push(Op {
                pid: a.pid,
                method: a.method,
                arg: a.payload,
                ret: None,
                inv: i,
                res: usize::MAX,
            });
        } else if a.is_return() {
            let op = ops
                .iter_mut()
                .rev()
                .find(|o| o.pid == a.pid && o.ret.is_none())
                .expect("return without a pending call");
            op.ret = Some(a.payload);
            op.res = i;
        }
    }
    let pending: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].ret.is_none()).collect();
    let done: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].ret.is_some()).collect();
    for mask in 0..(1u32 << pending.len()) {
        let mut chosen = done.clone();
        chosen.extend(
            pending
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, &i)| i),
        );
        if permutations_ok(&ops, &mut chosen, 0, spec) {
            return true;
        }
    }
    false
}

fn permutations_ok(ops: &[Op], order: &mut Vec<usize>, k: usize, spec: &SeqSpec) -> bool {
    if k == order.len() {
        return order_ok(ops, order, spec);
    }
    for i in k..order.len() {
        order.swap(k, i);
        if permutations_ok(ops, order, k + 1, spec) {
            order.swap(k, i);
            return true;
        }
        order.swap(k, i);
    }
    false
}

fn order_ok(ops: &[Op], order: &[usize], spec: &SeqSpec) -> bool {
    for (x, &a) in order.iter().enumerate() {
        for &b in &order[x + 1..] {
            if ops[b].res < ops[a].inv {
                return false;
            }
        }
    }
    let mut state = spec.initial.clone();
    for &i in order {
        let (r, next) = spec.step(&state, ops[i].method, ops[i].arg);
        if ops[i].ret.is_some_and(|v| v != r) {
            return false;
        }
        state = next;
    }
    true
}

/// Every well-formed queue history of at most `max_len` actions over two
/// processes and the values {1, 2}.
pub fn all_queue_histories(max_len: usize) -> Vec<Vec<Action>> {
    let mut out = Vec::new();
    let mut h = Vec::new();
    extend_histories(&mut h, [None, None], max_len, &mut out);
    out
}

fn extend_histories(
    h: &mut Vec<Action>,
    pending: [Option<&'static str>; 2],
    max_len: usize,
    out: &mut Vec<Vec<Action>>,
) {
    out.push(h.clone());
    if h.len() == max_len {
        return;
    }
    for p in 0..2 {
        let pid = p as u8 + 1;
        let steps: Vec<Action> = match pending[p] {
            None => vec![enq(pid, 1), enq(pid, 2), deq(pid)],
            Some("enq") => vec![ack(pid)],
            Some(_) => vec![
                deq_ret(pid, Val::Int(1)),
                deq_ret(pid, Val::Int(2)),
                deq_ret(pid, Val::Empty),
            ],
        };
        for a in steps {
            let mut next = pending;
            next[p] = if a.is_call() { Some(a.method) } else { None };
            h.push(a);
            extend_histories(h, next, max_len, out);
            h.pop();
        }
    }
}

/// Call/return projections of all paths, cut off at `max_len` visible
/// actions. Finite on any graph.
pub fn histories_upto<S>(g: &ReachGraph<S>, max_len: usize) -> BTreeSet<Vec<Action>> {
    let mut seen = BTreeSet::from([(0 as StateId, Vec::new())]);
    let mut stack = vec![(0 as StateId, Vec::new())];
    while let Some((s, h)) = stack.pop() {
        for &(a, t) in &g.succ[s as usize] {
            let mut next = h.clone();
            if a.is_visible() {
                if h.len() == max_len {
                    continue;
                }
                next.push(a);
            }
            if seen.insert((t, next.clone())) {
                stack.push((t, next));
            }
        }
    }
    seen.into_iter().map(|(_, h)| h).collect()
}
