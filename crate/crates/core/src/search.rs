//! Minimal-path search shared by the checkers.
//!
//! Paths are ordered by number of visible actions, then length, then
//! lexicographically by action. Uniform-cost search with that priority pops
//! every node first along its minimal path, since the order is preserved by
//! appending the same action to two paths.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::hash::Hash;

use rustc_hash::FxHashSet;

use crate::lts::Action;

pub(crate) fn min_path<N, S, G>(start: N, mut succ: S, mut goal: G) -> Option<(Vec<Action>, N)>
where
    N: Clone + Eq + Hash + Ord,
    S: FnMut(&N) -> Vec<(Action, N)>,
    G: FnMut(&N) -> bool,
{
    let mut seen: FxHashSet<N> = FxHashSet::default();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0usize, 0usize, Vec::<Action>::new(), start)));
    while let Some(Reverse((vis, len, path, node))) = heap.pop() {
        if !seen.insert(node.clone()) {
            continue;
        }
        if goal(&node) {
            return Some((path, node));
        }
        for (a, next) in succ(&node) {
            if seen.contains(&next) {
                continue;
            }
            let mut p = path.clone();
            p.push(a);
            heap.push(Reverse((
                vis + usize::from(a.is_visible()),
                len + 1,
                p,
                next,
            )));
        }
    }
    None
}

/// Strongly connected component index per node (iterative Tarjan). Components
/// are numbered in reverse topological order: every edge leaving a component
/// goes to one with a smaller index.
pub(crate) fn scc(n: usize, succ: &dyn Fn(usize) -> Vec<usize>) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut counter = 0;
    let mut ncomp = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, succ(root), 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some((v, ws, i)) = call.last_mut() {
            let v = *v;
            if *i < ws.len() {
                let w = ws[*i];
                *i += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, succ(w), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some((u, _, _)) = call.last() {
                    low[*u] = low[*u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scc_splits_chain_and_cycle() {
        let adj = [vec![1], vec![2], vec![1, 3], vec![]];
        let c = scc(4, &|v| adj[v].clone());
        assert_eq!(c[1], c[2]);
        assert_ne!(c[0], c[1]);
        assert!(c[3] < c[1] && c[1] < c[0]);
    }
}
