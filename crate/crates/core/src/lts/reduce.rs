use std::collections::VecDeque;
use std::hash::{Hash, Hasher};

use rustc_hash::{FxHashMap, FxHasher};

use super::{Action, ReachGraph, StateId};
use crate::search::scc;

/// A graph divided by branching bisimilarity. Internal labels are ignored and
/// divergence is not distinguished, so states on a common internal cycle
/// always share a block.
#[derive(Clone, Debug)]
pub struct Quotient {
    /// One state per block; block 0 holds the initial state and the rest are
    /// numbered in BFS order.
    pub graph: ReachGraph<u32>,
    /// Block of every state of the original graph.
    pub block: Vec<u32>,
}

/// Signature refinement on the graph with internal cycles collapsed. A
/// component's signature is the set of `(action, block)` pairs it can reach
/// through internal steps that stay in its own block; internal steps inside
/// a block contribute nothing themselves.
pub fn quotient<S>(g: &ReachGraph<S>) -> Quotient {
    let n = g.len();
    let comp = scc(n, &|s| {
        g.succ[s]
            .iter()
            .filter(|(a, _)| !a.is_visible())
            .map(|&(_, t)| t as usize)
            .collect()
    });
    let nc = comp.iter().max().map_or(0, |&m| m + 1);

    // Action 0 is internal; visible actions are numbered up to their label.
    let mut act_ids: FxHashMap<Action, u32> = FxHashMap::default();
    let mut cedges: Vec<Vec<(u32, u32)>> = vec![Vec::new(); nc];
    for s in 0..n {
        for &(a, t) in &g.succ[s] {
            let (cs, ct) = (comp[s], comp[t as usize]);
            let k = if a.is_visible() {
                let next = act_ids.len() as u32 + 1;
                *act_ids.entry(Action { label: "", ..a }).or_insert(next)
            } else {
                0
            };
            if k == 0 && cs == ct {
                continue;
            }
            cedges[cs].push((k, ct as u32));
        }
    }
    for e in &mut cedges {
        e.sort_unstable();
        e.dedup();
    }

    let mut block = vec![0u32; nc];
    let mut count = 1usize;
    loop {
        let mut sigs: Vec<Vec<(u32, u32)>> = vec![Vec::new(); nc];
        let mut next = vec![0u32; nc];
        // (old block, signature hash) -> [(representative component, new id)]
        let mut buckets: FxHashMap<(u32, u64), Vec<(u32, u32)>> = FxHashMap::default();
        let mut fresh = 0u32;
        // Internal edges between components go to smaller indices, so the
        // signatures they need are already built.
        for c in 0..nc {
            let mut sig = Vec::new();
            for &(k, t) in &cedges[c] {
                if k == 0 && block[t as usize] == block[c] {
                    sig.extend_from_slice(&sigs[t as usize]);
                } else {
                    sig.push((k, block[t as usize]));
                }
            }
            sig.sort_unstable();
            sig.dedup();
            let mut h = FxHasher::default();
            sig.hash(&mut h);
            let bucket = buckets.entry((block[c], h.finish())).or_default();
            next[c] = match bucket.iter().find(|&&(rep, _)| sigs[rep as usize] == sig) {
                Some(&(_, id)) => id,
                None => {
                    bucket.push((c as u32, fresh));
                    fresh += 1;
                    fresh - 1
                }
            };
            sigs[c] = sig;
        }
        block = next;
        if fresh as usize == count {
            break;
        }
        count = fresh as usize;
    }

    // Quotient edges, then renumber blocks in BFS order from the initial one.
    let state_block: Vec<u32> = (0..n).map(|s| block[comp[s]]).collect();
    let mut qsucc: Vec<Vec<(Action, u32)>> = vec![Vec::new(); count];
    let mut qcalls = vec![u32::MAX; count];
    for s in 0..n {
        let bs = state_block[s] as usize;
        qcalls[bs] = qcalls[bs].min(g.calls[s]);
        for &(a, t) in &g.succ[s] {
            let bt = state_block[t as usize];
            if !a.is_visible() && bt as usize == bs {
                continue;
            }
            qsucc[bs].push((a, bt));
        }
    }
    let key = |a: &Action| {
        if a.is_visible() {
            Action { label: "", ..*a }
        } else {
            Action::internal(0, "")
        }
    };
    for e in &mut qsucc {
        e.sort_unstable_by_key(|x| (key(&x.0), x.1, x.0));
        e.dedup_by(|x, y| key(&x.0) == key(&y.0) && x.1 == y.1);
    }
    let mut order = vec![u32::MAX; count];
    let mut seq = Vec::with_capacity(count);
    let start = if n == 0 { 0 } else { state_block[0] };
    let mut queue = VecDeque::new();
    if count > 0 {
        order[start as usize] = 0;
        seq.push(start);
        queue.push_back(start);
    }
    while let Some(b) = queue.pop_front() {
        for &(_, t) in &qsucc[b as usize] {
            if order[t as usize] == u32::MAX {
                order[t as usize] = seq.len() as u32;
                seq.push(t);
                queue.push_back(t);
            }
        }
    }
    debug_assert_eq!(seq.len(), count, "every block is reachable");
    let succ: Vec<Vec<(Action, StateId)>> = seq
        .iter()
        .map(|&b| {
            let mut e: Vec<(Action, StateId)> = qsucc[b as usize]
                .iter()
                .map(|&(a, t)| (a, order[t as usize]))
                .collect();
            e.sort_unstable();
            e
        })
        .collect();
    let graph = ReachGraph {
        states: (0..count as u32).collect(),
        calls: seq.iter().map(|&b| qcalls[b as usize]).collect(),
        succ,
        truncated: Vec::new(),
        bound: g.bound,
    };
    Quotient {
        graph,
        block: state_block.iter().map(|&b| order[b as usize]).collect(),
    }
}
