use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::rc::Rc;

use rustc_hash::FxHashMap;
use serde_json::{json, Value as Json};

use super::{enumerate_linearizations, History, Linearization};
use crate::lts::{Action, ReachGraph, StateId};
use crate::seqspec::SeqSpec;
use crate::Result;

/// Prefix tree of the traces of an explored graph, folded on
/// (end state, history): two traces with the same end state and the same
/// history have isomorphic subtrees with identical histories, so a
/// prefix-preserving assignment exists on the unfolding iff one exists on the
/// folded graph. Node 0 is the empty trace.
#[derive(Clone, Debug)]
pub struct TraceTree {
    pub nodes: Vec<TreeNode>,
    pub histories: Vec<History>,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub state: StateId,
    pub history: u32,
    pub children: Vec<(Action, u32)>,
    /// First-discovered parent; parent links form a BFS tree of shortest traces.
    pub parent: Option<(u32, Action)>,
}

impl TraceTree {
    pub fn from_graph<S>(graph: &ReachGraph<S>) -> Result<TraceTree> {
        graph.require_complete()?;
        let mut hist_ids: FxHashMap<Rc<[Action]>, u32> = FxHashMap::default();
        let mut histories = Vec::new();
        let mut ids: FxHashMap<(StateId, u32), u32> = FxHashMap::default();
        let mut nodes = Vec::new();
        let mut hist_actions: Vec<Rc<[Action]>> = Vec::new();

        let empty: Rc<[Action]> = Rc::from(Vec::new());
        hist_ids.insert(empty.clone(), 0);
        hist_actions.push(empty);
        histories.push(History::empty());
        ids.insert((0, 0), 0);
        nodes.push(TreeNode {
            state: 0,
            history: 0,
            children: Vec::new(),
            parent: None,
        });

        let mut queue = VecDeque::from([0u32]);
        while let Some(x) = queue.pop_front() {
            let (s, h) = (nodes[x as usize].state, nodes[x as usize].history);
            let mut children = Vec::new();
            for &(a, t) in &graph.succ[s as usize] {
                let h2 = if a.is_visible() {
                    let mut v = hist_actions[h as usize].to_vec();
                    v.push(a);
                    let v: Rc<[Action]> = v.into();
                    match hist_ids.get(&v) {
                        Some(&id) => id,
                        None => {
                            let id = histories.len() as u32;
                            histories.push(History::new(&v)?);
                            hist_ids.insert(v.clone(), id);
                            hist_actions.push(v);
                            id
                        }
                    }
                } else {
                    h
                };
                let c = *ids.entry((t, h2)).or_insert_with(|| {
                    nodes.push(TreeNode {
                        state: t,
                        history: h2,
                        children: Vec::new(),
                        parent: Some((x, a)),
                    });
                    queue.push_back((nodes.len() - 1) as u32);
                    (nodes.len() - 1) as u32
                });
                children.push((a, c));
            }
            nodes[x as usize].children = children;
        }
        Ok(TraceTree { nodes, histories })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Shortest trace reaching `node`.
    pub fn trace(&self, mut node: u32) -> Vec<Action> {
        let mut out = Vec::new();
        while let Some((p, a)) = self.nodes[node as usize].parent {
            out.push(a);
            node = p;
        }
        out.reverse();
        out
    }
}

/// A prefix-preserving assignment, stored as a finite strategy: starting from
/// the empty linearization at the root, `choice[(node, lin, edge)]` names the
/// linearization assigned to the child along `edge`. Linearizations are
/// indices into `lins[history]`.
#[derive(Clone, Debug)]
pub struct StrongLinFunction {
    pub lins: Vec<Vec<Linearization>>,
    pub choice: BTreeMap<(u32, u32, u32), u32>,
}

/// A finite subtree of traces on which no prefix-preserving assignment exists.
/// Each node lists the linearizations of its history that are ruled out; the
/// root rules out the empty linearization, and every ruled-out linearization is
/// refuted by a child none of whose extending linearizations survive.
#[derive(Clone, Debug)]
pub struct WitnessTree {
    pub nodes: Vec<WitnessNode>,
    pub truncated: bool,
}

#[derive(Clone, Debug)]
pub struct WitnessNode {
    pub trace: Vec<Action>,
    pub history: History,
    pub refuted: Vec<Linearization>,
    pub children: Vec<u32>,
}

impl WitnessTree {
    pub fn to_json(&self) -> Json {
        let nodes: Vec<Json> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                json!({
                    "id": i,
                    "trace": n.trace,
                    "history": n.history.actions(),
                    "refuted": n.refuted.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
                    "children": n.children,
                })
            })
            .collect();
        json!({"nodes": nodes, "truncated": self.truncated})
    }
}

#[derive(Clone, Debug)]
pub enum StrongOutcome {
    Function(StrongLinFunction),
    NoFunction(WitnessTree),
}

impl StrongOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, StrongOutcome::Function(_))
    }
}

const WITNESS_NODE_CAP: usize = 50_000;

/// Searches for a prefix-preserving assignment of linearizations.
///
/// Every node starts with all linearizations of its history as candidates; a
/// candidate is dropped when some child has no surviving candidate extending
/// it. The greatest fixpoint is reached with a worklist, which also handles
/// cycles (internal loops) in the folded tree.
pub fn check_strong_linearizability(tree: &TraceTree, spec: &SeqSpec) -> StrongOutcome {
    let lins: Vec<Vec<Linearization>> = tree
        .histories
        .iter()
        .map(|h| enumerate_linearizations(h, spec))
        .collect();
    let n = tree.nodes.len();

    // Extension table: for (parent history, child history), the child
    // linearizations extending each parent linearization.
    let mut ext_cache: FxHashMap<(u32, u32), Rc<Vec<Vec<u32>>>> = FxHashMap::default();
    let mut ext = |hp: u32, hc: u32| -> Rc<Vec<Vec<u32>>> {
        ext_cache
            .entry((hp, hc))
            .or_insert_with(|| {
                let lp = &lins[hp as usize];
                let lc = &lins[hc as usize];
                Rc::new(
                    lp.iter()
                        .map(|l| {
                            (0..lc.len() as u32)
                                .filter(|&j| l.is_prefix_of(&lc[j as usize]))
                                .collect()
                        })
                        .collect(),
                )
            })
            .clone()
    };

    let offsets: Vec<usize> = {
        let mut o = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for node in &tree.nodes {
            o.push(acc);
            acc += lins[node.history as usize].len();
        }
        o.push(acc);
        o
    };
    let total = offsets[n];
    let mut alive = vec![true; total];
    let mut reason = vec![u32::MAX; total];
    let mut parents: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (x, node) in tree.nodes.iter().enumerate() {
        for &(_, c) in &node.children {
            parents[c as usize].push(x as u32);
        }
    }

    let mut queued = vec![true; n];
    let mut queue: VecDeque<u32> = (0..n as u32).rev().collect();
    while let Some(x) = queue.pop_front() {
        queued[x as usize] = false;
        let node = &tree.nodes[x as usize];
        let base = offsets[x as usize];
        let mut changed = false;
        for i in 0..lins[node.history as usize].len() {
            if !alive[base + i] {
                continue;
            }
            for (e, &(_, c)) in node.children.iter().enumerate() {
                let table = ext(node.history, tree.nodes[c as usize].history);
                let cbase = offsets[c as usize];
                if !table[i].iter().any(|&j| alive[cbase + j as usize]) {
                    alive[base + i] = false;
                    reason[base + i] = e as u32;
                    changed = true;
                    break;
                }
            }
        }
        if changed {
            for &p in &parents[x as usize] {
                if !queued[p as usize] {
                    queued[p as usize] = true;
                    queue.push_back(p);
                }
            }
        }
    }

    // The root history is empty; its only linearization is ε at index 0.
    if alive[offsets[0]] {
        let mut choice = BTreeMap::new();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([(0u32, 0u32)]);
        seen.insert((0u32, 0u32));
        while let Some((x, i)) = queue.pop_front() {
            let node = &tree.nodes[x as usize];
            for (e, &(_, c)) in node.children.iter().enumerate() {
                let table = ext(node.history, tree.nodes[c as usize].history);
                let cbase = offsets[c as usize];
                let j = *table[i as usize]
                    .iter()
                    .find(|&&j| alive[cbase + j as usize])
                    .expect("surviving candidate");
                choice.insert((x, i, e as u32), j);
                if seen.insert((c, j)) {
                    queue.push_back((c, j));
                }
            }
        }
        return StrongOutcome::Function(StrongLinFunction { lins, choice });
    }

    // Unfold the refutation from the root.
    let mut wnodes: Vec<WitnessNode> = Vec::new();
    let mut work: VecDeque<(u32, Vec<Action>, BTreeSet<u32>, Option<u32>)> = VecDeque::new();
    work.push_back((0, Vec::new(), BTreeSet::from([0u32]), None));
    let mut truncated = false;
    while let Some((x, trace, obligations, parent)) = work.pop_front() {
        if wnodes.len() >= WITNESS_NODE_CAP {
            truncated = true;
            break;
        }
        let node = &tree.nodes[x as usize];
        let id = wnodes.len() as u32;
        if let Some(p) = parent {
            wnodes[p as usize].children.push(id);
        }
        let base = offsets[x as usize];
        let mut by_edge: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for &i in &obligations {
            debug_assert!(!alive[base + i as usize]);
            let e = reason[base + i as usize];
            let c = node.children[e as usize].1;
            let table = ext(node.history, tree.nodes[c as usize].history);
            by_edge
                .entry(e)
                .or_default()
                .extend(table[i as usize].iter().copied());
        }
        wnodes.push(WitnessNode {
            trace: trace.clone(),
            history: tree.histories[node.history as usize].clone(),
            refuted: obligations
                .iter()
                .map(|&i| lins[node.history as usize][i as usize].clone())
                .collect(),
            children: Vec::new(),
        });
        for (e, obl) in by_edge {
            let (a, c) = node.children[e as usize];
            let mut t = trace.clone();
            t.push(a);
            work.push_back((c, t, obl, Some(id)));
        }
    }
    StrongOutcome::NoFunction(WitnessTree {
        nodes: wnodes,
        truncated,
    })
}

/// Checks that `f` is a prefix-preserving assignment on `tree`: every reachable
/// (node, linearization) pair holds a linearization of the node's history and
/// every child choice extends it.
pub fn validate_strong_function(f: &StrongLinFunction, tree: &TraceTree, spec: &SeqSpec) -> bool {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([(0u32, 0u32)]);
    if f.lins[tree.nodes[0].history as usize].first()
        .is_none_or(|l| !l.ops.is_empty())
    {
        return false;
    }
    while let Some((x, i)) = queue.pop_front() {
        if !seen.insert((x, i)) {
            continue;
        }
        let node = &tree.nodes[x as usize];
        let l = &f.lins[node.history as usize][i as usize];
        if !spec.accepts(&l.ops) {
            return false;
        }
        for (e, &(_, c)) in node.children.iter().enumerate() {
            let Some(&j) = f.choice.get(&(x, i, e as u32)) else {
                return false;
            };
            let lc = &f.lins[tree.nodes[c as usize].history as usize][j as usize];
            if !l.is_prefix_of(lc) {
                return false;
            }
            queue.push_back((c, j));
        }
    }
    true
}
