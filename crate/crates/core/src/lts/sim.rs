use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::rc::Rc;

use rustc_hash::{FxHashMap, FxHashSet};
use serde_json::{json, Value as Json};

use super::reduce::{quotient, Quotient};
use super::{explore, Action, Bound, Lts, ReachGraph, StateEncode, StateId};
use crate::{Error, Result};

/// One recorded right-hand response to a left step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Move {
    pub left: StateId,
    pub action: Action,
    pub left_succ: StateId,
    pub right: StateId,
    /// Right transitions `(action, target)` starting at `right`.
    pub seq: Vec<(Action, StateId)>,
}

impl Move {
    pub fn end(&self) -> StateId {
        self.seq.last().map_or(self.right, |&(_, t)| t)
    }
}

/// A forward-simulation relation together with the moves that justify it.
#[derive(Clone, Debug)]
pub struct SimWitness {
    pub left_fingerprint: u64,
    pub right_fingerprint: u64,
    pub left_initial: StateId,
    pub right_initial: StateId,
    pub pairs: BTreeSet<(StateId, StateId)>,
    /// Keyed by `(left, action, left_succ, right)`.
    pub moves: BTreeMap<(StateId, Action, StateId, StateId), Vec<(Action, StateId)>>,
}

impl SimWitness {
    pub fn to_json(&self) -> Json {
        let pairs: Vec<Json> = self.pairs.iter().map(|(l, r)| json!([l, r])).collect();
        let moves: Vec<Json> = self
            .moves
            .iter()
            .map(|((l, a, l1, r), seq)| {
                let seq: Vec<Json> = seq.iter().map(|(b, t)| json!([b, t])).collect();
                json!({"left": l, "action": a, "left_succ": l1, "right": r, "seq": seq})
            })
            .collect();
        json!({"pairs": pairs, "moves": moves})
    }
}

/// A refutation of simulation. `left_path` is the left behaviour; the right
/// side's best response is `right_path`. When `trace_level` holds, no right
/// path at all has the same call/return projection as `left_path`; otherwise
/// the right side can follow the visible actions but every choice it makes
/// leads into a pair that is eventually refuted, and `right_path` is the choice
/// that survives longest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub left_path: Vec<Action>,
    pub right_path: Vec<Action>,
    pub trace_level: bool,
}

impl Counterexample {
    pub fn to_json(&self) -> Json {
        json!({
            "trace": self.left_path,
            "right_response": self.right_path,
            "trace_level": self.trace_level,
        })
    }
}

#[derive(Clone, Debug)]
pub enum SimOutcome {
    Witness(SimWitness),
    Counterexample(Counterexample),
}

impl SimOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, SimOutcome::Witness(_))
    }

    pub fn witness(&self) -> Option<&SimWitness> {
        match self {
            SimOutcome::Witness(w) => Some(w),
            SimOutcome::Counterexample(_) => None,
        }
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            SimOutcome::Counterexample(c) => Some(c),
            SimOutcome::Witness(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MissingInitial,
    MissingMove {
        left: StateId,
        right: StateId,
        action: Action,
        left_succ: StateId,
    },
    BrokenPath {
        left: StateId,
        right: StateId,
        action: Action,
    },
    VisibleMismatch {
        left: StateId,
        right: StateId,
        action: Action,
    },
    EndsOutside {
        left: StateId,
        right: StateId,
        action: Action,
        end: (StateId, StateId),
    },
}

/// Explores `right` under `bound` and checks `left ≼ right`.
pub fn check_simulation<SL, R>(
    left: &ReachGraph<SL>,
    right: &R,
    bound: Bound,
) -> Result<(SimOutcome, ReachGraph<R::State>)>
where
    SL: StateEncode,
    R: Lts,
{
    let rg = explore(right, bound)?;
    let out = check_simulation_graphs(left, &rg, None)?;
    Ok((out, rg))
}

pub type Guide<'a, SL, SR> = &'a (dyn Fn(&SL, &SR) -> bool + Sync);

/// Right states reachable from `seeds` by internal steps, in BFS order, with
/// the index of the parent entry and the edge taken (`u32::MAX` for seeds).
fn tau_closure<SR>(g: &ReachGraph<SR>, seeds: &[StateId]) -> Vec<(StateId, u32, u32)> {
    let mut seen = FxHashSet::default();
    let mut out = Vec::new();
    for &s in seeds {
        if seen.insert(s) {
            out.push((s, u32::MAX, u32::MAX));
        }
    }
    let mut i = 0;
    while i < out.len() {
        let s = out[i].0;
        for (e, &(a, t)) in g.succ[s as usize].iter().enumerate() {
            if !a.is_visible() && seen.insert(t) {
                out.push((t, i as u32, e as u32));
            }
        }
        i += 1;
    }
    out
}

/// Right answers to the left action `a` from `r`: the ends of τ* paths
/// (internal `a`) or τ*·α paths (visible `a`), shortest first, with the path.
fn responses<SR>(
    g: &ReachGraph<SR>,
    r: StateId,
    a: &Action,
) -> Vec<(StateId, Vec<(Action, StateId)>)> {
    let cl = tau_closure(g, &[r]);
    let path = |k: usize| {
        let mut rev = Vec::new();
        let mut i = k;
        while cl[i].1 != u32::MAX {
            let (s, p, e) = cl[i];
            rev.push((g.succ[cl[p as usize].0 as usize][e as usize].0, s));
            i = p as usize;
        }
        rev.reverse();
        rev
    };
    if !a.is_visible() {
        return (0..cl.len()).map(|k| (cl[k].0, path(k))).collect();
    }
    let mut seen = FxHashSet::default();
    let mut out = Vec::new();
    for (k, &(s, _, _)) in cl.iter().enumerate() {
        for &(b, t) in &g.succ[s as usize] {
            if b.same_visible(a) && seen.insert(t) {
                let mut p = path(k);
                p.push((b, t));
                out.push((t, p));
            }
        }
    }
    out
}

const NO_EDGE: u32 = u32::MAX;
const EXIT: u32 = 1 << 31;

/// The simulation game. After every left step from a pair `(l, r)` the right
/// side moves in a turn node `(l, left edge, r')`, where it may take internal
/// steps one at a time and eventually leave to a pair, directly for an
/// internal left step or through a matching visible step otherwise.
struct Game {
    pairs: Vec<(StateId, StateId)>,
    pair_ids: FxHashMap<u64, u32>,
    /// Turn node entered by each left step of each pair.
    slot_start: Vec<u32>,
    slots: Vec<u32>,
    /// `(left state, left edge index, right state)`.
    turns: Vec<(StateId, u32, StateId)>,
    /// Internal right steps between turn nodes: `(target turn, right edge)`.
    tau_start: Vec<u32>,
    tau: Vec<(u32, u32)>,
    /// Ways out of a turn node: `(pair, right edge or NO_EDGE)`.
    exit_start: Vec<u32>,
    exits: Vec<(u32, u32)>,
}

fn pair_key(l: StateId, r: StateId) -> u64 {
    ((l as u64) << 32) | r as u64
}

impl Game {
    /// With `stay`, internal left steps are answered only by the empty right
    /// path.
    fn build<SL, SR>(
        left: &ReachGraph<SL>,
        right: &ReachGraph<SR>,
        accepts: &dyn Fn(StateId, StateId) -> bool,
        stay: bool,
    ) -> Result<Game> {
        let mut g = Game {
            pairs: vec![(0, 0)],
            pair_ids: FxHashMap::default(),
            slot_start: Vec::new(),
            slots: Vec::new(),
            turns: Vec::new(),
            tau_start: Vec::new(),
            tau: Vec::new(),
            exit_start: Vec::new(),
            exits: Vec::new(),
        };
        g.pair_ids.insert(pair_key(0, 0), 0);
        let mut turn_ids: FxHashMap<(StateId, u32, StateId), u32> = FxHashMap::default();
        let (mut next_pair, mut next_turn) = (0usize, 0usize);
        let too_big = |n: usize| n >= EXIT as usize;
        while next_pair < g.pairs.len() || next_turn < g.turns.len() {
            if next_pair < g.pairs.len() {
                let (l, r) = g.pairs[next_pair];
                g.slot_start.push(g.slots.len() as u32);
                for i in 0..left.succ[l as usize].len() as u32 {
                    let id = *turn_ids.entry((l, i, r)).or_insert_with(|| {
                        g.turns.push((l, i, r));
                        (g.turns.len() - 1) as u32
                    });
                    g.slots.push(id);
                }
                next_pair += 1;
                continue;
            }
            let (l, i, r) = g.turns[next_turn];
            let (a, l1) = left.succ[l as usize][i as usize];
            g.tau_start.push(g.tau.len() as u32);
            g.exit_start.push(g.exits.len() as u32);
            let exit_to = |g: &mut Game, r1: StateId, e: u32| {
                if !accepts(l1, r1) {
                    return;
                }
                let id = *g.pair_ids.entry(pair_key(l1, r1)).or_insert_with(|| {
                    g.pairs.push((l1, r1));
                    (g.pairs.len() - 1) as u32
                });
                g.exits.push((id, e));
            };
            if !a.is_visible() {
                exit_to(&mut g, r, NO_EDGE);
            }
            let edges = if stay && !a.is_visible() {
                &[][..]
            } else {
                &right.succ[r as usize][..]
            };
            for (e, &(b, t)) in edges.iter().enumerate() {
                if !b.is_visible() {
                    let id = *turn_ids.entry((l, i, t)).or_insert_with(|| {
                        g.turns.push((l, i, t));
                        (g.turns.len() - 1) as u32
                    });
                    g.tau.push((id, e as u32));
                } else if a.is_visible() && b.same_visible(&a) {
                    exit_to(&mut g, t, e as u32);
                }
            }
            next_turn += 1;
            if too_big(g.turns.len()) || too_big(g.exits.len()) || too_big(g.tau.len()) {
                return Err(Error::BudgetExceeded {
                    ceiling: EXIT as usize,
                });
            }
        }
        g.slot_start.push(g.slots.len() as u32);
        g.tau_start.push(g.tau.len() as u32);
        g.exit_start.push(g.exits.len() as u32);
        Ok(g)
    }

    fn slot_range(&self, p: usize) -> std::ops::Range<usize> {
        self.slot_start[p] as usize..self.slot_start[p + 1] as usize
    }

    /// Greatest fixpoint on pairs around a least fixpoint on turn nodes: a
    /// turn node is won if it reaches, in finitely many internal steps, an
    /// exit into a live pair; a pair dies once some left step leads to a lost
    /// turn node. Returns the death time and refuting slot of every pair and,
    /// for won turn nodes, the first step of a shortest way out.
    fn solve(&self) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
        let n_pairs = self.pairs.len();
        let n_turns = self.turns.len();
        let mut rev_start = vec![0u32; n_turns + 1];
        for &(t, _) in &self.tau {
            rev_start[t as usize + 1] += 1;
        }
        for i in 0..n_turns {
            rev_start[i + 1] += rev_start[i];
        }
        let mut fill = rev_start.clone();
        let mut rev = vec![0u32; self.tau.len()];
        for u in 0..n_turns {
            for k in self.tau_start[u]..self.tau_start[u + 1] {
                let v = self.tau[k as usize].0 as usize;
                rev[fill[v] as usize] = k;
                fill[v] += 1;
            }
        }
        drop(fill);
        // Owner of every internal edge, to walk `rev` back to its source.
        let mut tau_src = vec![0u32; self.tau.len()];
        for u in 0..n_turns {
            for k in self.tau_start[u]..self.tau_start[u + 1] {
                tau_src[k as usize] = u as u32;
            }
        }

        let mut death = vec![u32::MAX; n_pairs];
        let mut dead_slot = vec![u32::MAX; n_pairs];
        let mut via = vec![u32::MAX; n_turns];
        let mut clock = 0u32;
        let mut queue = VecDeque::new();
        loop {
            via.fill(u32::MAX);
            for t in 0..n_turns {
                for k in self.exit_start[t]..self.exit_start[t + 1] {
                    if death[self.exits[k as usize].0 as usize] == u32::MAX {
                        via[t] = EXIT | k;
                        queue.push_back(t as u32);
                        break;
                    }
                }
            }
            while let Some(v) = queue.pop_front() {
                for &k in &rev[rev_start[v as usize] as usize..rev_start[v as usize + 1] as usize] {
                    let u = tau_src[k as usize] as usize;
                    if via[u] == u32::MAX {
                        via[u] = k;
                        queue.push_back(u as u32);
                    }
                }
            }
            let mut changed = false;
            for p in 0..n_pairs {
                if death[p] != u32::MAX {
                    continue;
                }
                if let Some(s) = self
                    .slot_range(p)
                    .find(|&s| via[self.slots[s] as usize] == u32::MAX)
                {
                    death[p] = clock;
                    dead_slot[p] = s as u32;
                    clock += 1;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (death, dead_slot, via)
    }
}

/// Checks `left ≼ right` on explored graphs, optionally restricting the pairs
/// the right side may move to to those accepted by `guide`.
///
/// A visible left step is answered by τ*·α on the right and an internal one
/// by τ*. Allowing a trailing τ* after α does not change which initial pairs
/// survive, since any right state reached that way is also reachable while
/// answering the following left step.
///
/// Without a guide both graphs are first divided by branching bisimilarity,
/// which preserves the answer, and the right side answers internal left
/// steps by standing still: if `(l, r')` is in a simulation and `r` reaches
/// `r'` by τ*, adding `(l, r)` keeps it a simulation. Witnesses and
/// counterexamples are then mapped back to the original graphs. A guide
/// talks about concrete states and may reject the pairs standing still
/// creates, so guided checks run on the original graphs with full τ* answers.
pub fn check_simulation_graphs<SL, SR>(
    left: &ReachGraph<SL>,
    right: &ReachGraph<SR>,
    guide: Option<Guide<'_, SL, SR>>,
) -> Result<SimOutcome>
where
    SL: StateEncode,
    SR: StateEncode,
{
    left.require_complete()?;
    right.require_complete()?;
    match guide {
        Some(g) => check_guided(left, right, g),
        None => check_simulation_reduced(left, &quotient(left), right, &quotient(right)),
    }
}

fn check_guided<SL, SR>(
    left: &ReachGraph<SL>,
    right: &ReachGraph<SR>,
    guide: Guide<'_, SL, SR>,
) -> Result<SimOutcome>
where
    SL: StateEncode,
    SR: StateEncode,
{
    let accepts =
        |l: StateId, r: StateId| guide(&left.states[l as usize], &right.states[r as usize]);
    if !accepts(0, 0) {
        let left_path = trace_level_counterexample(left, right)
            .map(|p| p.into_iter().map(|(a, _)| a).collect());
        let trace_level = left_path.is_some();
        return Ok(SimOutcome::Counterexample(Counterexample {
            left_path: left_path.unwrap_or_default(),
            right_path: Vec::new(),
            trace_level,
        }));
    }
    let game = Game::build(left, right, &accepts, false)?;
    let (death, dead_slot, via) = game.solve();
    if death[0] == u32::MAX {
        return Ok(SimOutcome::Witness(extract_witness(
            left, right, &game, &via,
        )));
    }
    if let Some(path) = trace_level_counterexample(left, right) {
        return Ok(SimOutcome::Counterexample(Counterexample {
            left_path: path.into_iter().map(|(a, _)| a).collect(),
            right_path: Vec::new(),
            trace_level: true,
        }));
    }
    let mut left_path = Vec::new();
    let mut right_path = Vec::new();
    for (a, _, path) in spine(left, right, &game, &death, &dead_slot, false) {
        left_path.push(a);
        right_path.extend(path.into_iter().map(|(b, _)| b));
    }
    Ok(SimOutcome::Counterexample(Counterexample {
        left_path,
        right_path,
        trace_level: false,
    }))
}

/// Unguided check on precomputed quotients (see [`check_simulation_graphs`]).
pub fn check_simulation_reduced<SL, SR>(
    left: &ReachGraph<SL>,
    ql: &Quotient,
    right: &ReachGraph<SR>,
    qr: &Quotient,
) -> Result<SimOutcome>
where
    SL: StateEncode,
    SR: StateEncode,
{
    left.require_complete()?;
    right.require_complete()?;
    let game = Game::build(&ql.graph, &qr.graph, &|_, _| true, true)?;
    let (death, dead_slot, _) = game.solve();
    let alive = |bl: u32, br: u32| {
        game.pair_ids
            .get(&pair_key(bl, br))
            .is_some_and(|&p| death[p as usize] == u32::MAX)
    };

    if death[0] == u32::MAX {
        return Ok(SimOutcome::Witness(lift_witness(
            left, ql, right, qr, &alive,
        )));
    }
    if let Some(path) = trace_level_counterexample(&ql.graph, &qr.graph) {
        let (left_path, _) = concretize_left(left, ql, 0, &path);
        return Ok(SimOutcome::Counterexample(Counterexample {
            left_path,
            right_path: Vec::new(),
            trace_level: true,
        }));
    }

    // Branching failure: follow the refuting steps on the quotients, letting
    // the right side pick the answer refuted last, then replay both sides on
    // the original graphs.
    let steps = spine(&ql.graph, &qr.graph, &game, &death, &dead_slot, true);
    let mut left_path = Vec::new();
    let mut right_path = Vec::new();
    let mut l = 0;
    let mut r = 0;
    for (a, lb, path) in steps {
        let (part, l1) = concretize_left(left, ql, l, &[(a, lb)]);
        left_path.extend(part);
        l = l1;
        if let Some(&(_, rb)) = path.last() {
            let found = right_answer(right, r, &a, &|t| qr.block[t as usize] == rb);
            let Some(seq) = found else { break };
            r = seq.last().map_or(r, |&(_, t)| t);
            right_path.extend(seq.into_iter().map(|(b, _)| b));
        }
    }
    Ok(SimOutcome::Counterexample(Counterexample {
        left_path,
        right_path,
        trace_level: false,
    }))
}

/// The refuting path through a lost game: each left step with its target and
/// the right answer that is refuted last.
fn spine<SL, SR>(
    left: &ReachGraph<SL>,
    right: &ReachGraph<SR>,
    game: &Game,
    death: &[u32],
    dead_slot: &[u32],
    stay: bool,
) -> Vec<(Action, StateId, Vec<(Action, StateId)>)> {
    let mut out = Vec::new();
    let mut p = 0usize;
    while dead_slot[p] != u32::MAX {
        let slot = dead_slot[p];
        let (l, r) = game.pairs[p];
        let i = slot - game.slot_start[p];
        let (a, l1) = left.succ[l as usize][i as usize];
        let answers = if stay && !a.is_visible() {
            vec![(r, Vec::new())]
        } else {
            responses(right, r, &a)
        };
        let best = answers
            .into_iter()
            .filter_map(|(r1, path)| game.pair_ids.get(&pair_key(l1, r1)).map(|&q| (q, path)))
            .max_by_key(|(q, _)| (death[*q as usize], Reverse(*q)));
        let Some((q, path)) = best else {
            out.push((a, l1, Vec::new()));
            break;
        };
        out.push((a, l1, path));
        p = q as usize;
    }
    out
}

/// Shortest right path τ*·α (visible `a`) from `r` whose end satisfies `goal`.
fn right_answer<SR>(
    right: &ReachGraph<SR>,
    r: StateId,
    a: &Action,
    goal: &dyn Fn(StateId) -> bool,
) -> Option<Vec<(Action, StateId)>> {
    tau_closure_until(right, r, a, goal)
}

/// BFS over internal steps from `r`, stopping at the first `a`-edge into a
/// state accepted by `goal`.
fn tau_closure_until<SR>(
    g: &ReachGraph<SR>,
    r: StateId,
    a: &Action,
    goal: &dyn Fn(StateId) -> bool,
) -> Option<Vec<(Action, StateId)>> {
    let mut parent: FxHashMap<StateId, (StateId, Action)> = FxHashMap::default();
    let mut queue = VecDeque::from([r]);
    let mut seen = FxHashSet::default();
    seen.insert(r);
    let path_to = |parent: &FxHashMap<StateId, (StateId, Action)>, mut s: StateId| {
        let mut rev = Vec::new();
        while s != r {
            let (p, b) = parent[&s];
            rev.push((b, s));
            s = p;
        }
        rev.reverse();
        rev
    };
    while let Some(s) = queue.pop_front() {
        for &(b, t) in &g.succ[s as usize] {
            if b.same_visible(a) && goal(t) {
                let mut p = path_to(&parent, s);
                p.push((b, t));
                return Some(p);
            }
        }
        for &(b, t) in &g.succ[s as usize] {
            if !b.is_visible() && seen.insert(t) {
                parent.insert(t, (s, b));
                queue.push_back(t);
            }
        }
    }
    None
}

/// Replays a path of quotient edges `(action, target block)` on the original
/// graph from `from`. Each quotient edge becomes internal steps
/// inside the current block followed by one matching step into the target.
fn concretize_left<S>(
    g: &ReachGraph<S>,
    q: &Quotient,
    from: StateId,
    path: &[(Action, StateId)],
) -> (Vec<Action>, StateId) {
    let mut out = Vec::new();
    let mut x = from;
    for &(a, target) in path {
        let here = q.block[x as usize];
        let mut parent: FxHashMap<StateId, (StateId, Action)> = FxHashMap::default();
        let mut seen = FxHashSet::default();
        let mut queue = VecDeque::from([x]);
        seen.insert(x);
        let mut hit = None;
        'bfs: while let Some(s) = queue.pop_front() {
            for &(b, t) in &g.succ[s as usize] {
                let matches = if a.is_visible() {
                    b.same_visible(&a)
                } else {
                    !b.is_visible()
                };
                if matches && q.block[t as usize] == target && (a.is_visible() || target != here) {
                    hit = Some((s, b, t));
                    break 'bfs;
                }
            }
            for &(b, t) in &g.succ[s as usize] {
                if !b.is_visible() && q.block[t as usize] == here && seen.insert(t) {
                    parent.insert(t, (s, b));
                    queue.push_back(t);
                }
            }
        }
        let (s, b, t) = hit.expect("quotient edges are realised by bisimilar states");
        let mut rev = Vec::new();
        let mut y = s;
        while y != x {
            let (p, c) = parent[&y];
            rev.push(c);
            y = p;
        }
        rev.reverse();
        out.extend(rev);
        out.push(b);
        x = t;
    }
    (out, x)
}

/// Maps a simulation between quotients back to the original graphs: a pair
/// `(l, r)` is kept when the pair of their blocks survived. Internal left
/// steps are answered by standing still, visible ones by the shortest right
/// path into a surviving block pair.
fn lift_witness<SL, SR>(
    left: &ReachGraph<SL>,
    ql: &Quotient,
    right: &ReachGraph<SR>,
    qr: &Quotient,
    alive: &dyn Fn(u32, u32) -> bool,
) -> SimWitness
where
    SL: StateEncode,
    SR: StateEncode,
{
    let mut pairs: BTreeSet<(StateId, StateId)> = BTreeSet::new();
    let mut moves = BTreeMap::new();
    let mut queue = VecDeque::from([(0, 0)]);
    pairs.insert((0, 0));
    while let Some((l, r)) = queue.pop_front() {
        for &(a, l1) in &left.succ[l as usize] {
            let seq = if a.is_visible() {
                let lb = ql.block[l1 as usize];
                right_answer(right, r, &a, &|t| alive(lb, qr.block[t as usize]))
                    .expect("a surviving block pair has a concrete answer")
            } else {
                Vec::new()
            };
            let r1 = seq.last().map_or(r, |&(_, t)| t);
            moves.insert((l, a, l1, r), seq);
            if pairs.insert((l1, r1)) {
                queue.push_back((l1, r1));
            }
        }
    }
    SimWitness {
        left_fingerprint: left.fingerprint(),
        right_fingerprint: right.fingerprint(),
        left_initial: 0,
        right_initial: 0,
        pairs,
        moves,
    }
}

fn extract_witness<SL, SR>(
    left: &ReachGraph<SL>,
    right: &ReachGraph<SR>,
    game: &Game,
    via: &[u32],
) -> SimWitness
where
    SL: StateEncode,
    SR: StateEncode,
{
    let mut chosen: BTreeSet<u32> = BTreeSet::new();
    let mut moves = BTreeMap::new();
    let mut queue = VecDeque::from([0u32]);
    chosen.insert(0);
    while let Some(p) = queue.pop_front() {
        let (l, r) = game.pairs[p as usize];
        for (i, s) in game.slot_range(p as usize).enumerate() {
            let (a, l1) = left.succ[l as usize][i];
            let mut t = game.slots[s] as usize;
            let mut seq = Vec::new();
            let q = loop {
                let v = via[t];
                debug_assert_ne!(v, u32::MAX, "live pair with a lost turn");
                let at = game.turns[t].2 as usize;
                if v & EXIT != 0 {
                    let (q, e) = game.exits[(v & !EXIT) as usize];
                    if e != NO_EDGE {
                        seq.push(right.succ[at][e as usize]);
                    }
                    break q;
                }
                let (t2, e) = game.tau[v as usize];
                seq.push(right.succ[at][e as usize]);
                t = t2 as usize;
            };
            moves.insert((l, a, l1, r), seq);
            if chosen.insert(q) {
                queue.push_back(q);
            }
        }
    }
    SimWitness {
        left_fingerprint: left.fingerprint(),
        right_fingerprint: right.fingerprint(),
        left_initial: 0,
        right_initial: 0,
        pairs: chosen.into_iter().map(|p| game.pairs[p as usize]).collect(),
        moves,
    }
}

/// Minimal left path (by visible count, then length, then action order) whose
/// call/return projection is not a right trace, as `(action, target)` edges.
fn trace_level_counterexample<SL, SR>(
    left: &ReachGraph<SL>,
    right: &ReachGraph<SR>,
) -> Option<Vec<(Action, StateId)>> {
    type Key = (StateId, Rc<[StateId]>);
    let close = |seeds: &[StateId]| -> Rc<[StateId]> {
        let mut set: Vec<StateId> = tau_closure(right, seeds)
            .into_iter()
            .map(|(s, _, _)| s)
            .collect();
        set.sort_unstable();
        set.into()
    };
    let start = close(&[0]);
    let mut seen: FxHashSet<Key> = FxHashSet::default();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((
        0usize,
        0usize,
        Vec::<(Action, StateId)>::new(),
        0u32,
        start,
        false,
    )));
    while let Some(Reverse((vis, len, path, l, set, goal))) = heap.pop() {
        if goal {
            return Some(path);
        }
        if !seen.insert((l, set.clone())) {
            continue;
        }
        for &(a, l1) in &left.succ[l as usize] {
            let next_set = if a.is_visible() {
                let mut seeds = Vec::new();
                for &r in set.iter() {
                    for (b, t) in &right.succ[r as usize] {
                        if b.same_visible(&a) {
                            seeds.push(*t);
                        }
                    }
                }
                close(&seeds)
            } else {
                set.clone()
            };
            let mut p = path.clone();
            p.push((a, l1));
            let v = vis + usize::from(a.is_visible());
            let empty = next_set.is_empty();
            heap.push(Reverse((v, len + 1, p, l1, next_set, empty)));
        }
    }
    None
}

/// The identity relation on `g`, each step answered by itself.
pub fn identity_witness<S: StateEncode>(g: &ReachGraph<S>) -> SimWitness {
    let fp = g.fingerprint();
    let mut moves = BTreeMap::new();
    for (s, edges) in g.succ.iter().enumerate() {
        for &(a, t) in edges {
            moves.insert((s as StateId, a, t, s as StateId), vec![(a, t)]);
        }
    }
    SimWitness {
        left_fingerprint: fp,
        right_fingerprint: fp,
        left_initial: 0,
        right_initial: 0,
        pairs: (0..g.len() as StateId).map(|s| (s, s)).collect(),
        moves,
    }
}

/// Exhaustively checks the two witness invariants against the graphs.
pub fn validate_witness<SL, SR>(
    w: &SimWitness,
    left: &ReachGraph<SL>,
    right: &ReachGraph<SR>,
) -> std::result::Result<(), Violation> {
    if !w.pairs.contains(&(left.initial(), right.initial())) {
        return Err(Violation::MissingInitial);
    }
    for &(l, r) in &w.pairs {
        for &(a, l1) in &left.succ[l as usize] {
            let Some(seq) = w.moves.get(&(l, a, l1, r)) else {
                return Err(Violation::MissingMove {
                    left: l,
                    right: r,
                    action: a,
                    left_succ: l1,
                });
            };
            let mut at = r;
            for &(b, t) in seq {
                if !right
                    .succ
                    .get(at as usize)
                    .is_some_and(|es| es.contains(&(b, t)))
                {
                    return Err(Violation::BrokenPath {
                        left: l,
                        right: r,
                        action: a,
                    });
                }
                at = t;
            }
            let vis: Vec<Action> = seq
                .iter()
                .map(|(b, _)| *b)
                .filter(Action::is_visible)
                .collect();
            let ok = if a.is_visible() {
                vis.len() == 1 && vis[0].same_visible(&a)
            } else {
                vis.is_empty()
            };
            if !ok {
                return Err(Violation::VisibleMismatch {
                    left: l,
                    right: r,
                    action: a,
                });
            }
            if !w.pairs.contains(&(l1, at)) {
                return Err(Violation::EndsOutside {
                    left: l,
                    right: r,
                    action: a,
                    end: (l1, at),
                });
            }
        }
    }
    Ok(())
}

/// Relational composition of `w1: A ≼ B` and `w2: B ≼ C`, restricted to the
/// pairs reachable from the initial pair through composed moves.
pub fn compose_witness(w1: &SimWitness, w2: &SimWitness) -> Result<SimWitness> {
    if w1.right_fingerprint != w2.left_fingerprint {
        return Err(Error::IncompatibleWitnesses(format!(
            "middle state spaces differ ({:016x} vs {:016x})",
            w1.right_fingerprint, w2.left_fingerprint
        )));
    }
    // Left steps of A are read off w1's moves.
    let mut a_steps: BTreeMap<(StateId, StateId), Vec<(Action, StateId)>> = BTreeMap::new();
    for &(l, a, l1, b) in w1.moves.keys() {
        a_steps.entry((l, b)).or_default().push((a, l1));
    }
    let init = (w1.left_initial, w2.right_initial, w1.right_initial);
    if !w1.pairs.contains(&(init.0, init.2)) || !w2.pairs.contains(&(init.2, init.1)) {
        return Err(Error::IncompatibleWitnesses(
            "initial pairs do not compose".into(),
        ));
    }
    let mut pairs = BTreeSet::new();
    let mut moves = BTreeMap::new();
    let mut middle: BTreeMap<(StateId, StateId), StateId> = BTreeMap::new();
    let mut queue = VecDeque::new();
    middle.insert((init.0, init.1), init.2);
    pairs.insert((init.0, init.1));
    queue.push_back((init.0, init.1));
    while let Some((a, c)) = queue.pop_front() {
        let b = middle[&(a, c)];
        for &(act, a1) in a_steps.get(&(a, b)).map(Vec::as_slice).unwrap_or(&[]) {
            let bseq = &w1.moves[&(a, act, a1, b)];
            let mut cseq = Vec::new();
            let (mut bi, mut ci) = (b, c);
            for &(bact, b1) in bseq {
                let step = w2.moves.get(&(bi, bact, b1, ci)).ok_or_else(|| {
                    Error::IncompatibleWitnesses(format!(
                        "no move for middle step from ({bi},{ci})"
                    ))
                })?;
                cseq.extend_from_slice(step);
                ci = step.last().map_or(ci, |&(_, t)| t);
                bi = b1;
            }
            moves.insert((a, act, a1, c), cseq);
            if pairs.insert((a1, ci)) {
                middle.insert((a1, ci), bi);
                queue.push_back((a1, ci));
            }
        }
    }
    Ok(SimWitness {
        left_fingerprint: w1.left_fingerprint,
        right_fingerprint: w2.right_fingerprint,
        left_initial: init.0,
        right_initial: init.1,
        pairs,
        moves,
    })
}

/// True if no right path has the same call/return projection as `path`.
/// Plain depth-first search over right paths; kept independent of the
/// closure machinery used by the checker.
pub fn confirm_no_weak_match<SR>(path: &[Action], right: &ReachGraph<SR>) -> bool {
    let target: Vec<Action> = path.iter().filter(|a| a.is_visible()).copied().collect();
    let mut seen = FxHashSet::default();
    let mut stack = vec![(0u32, 0usize)];
    while let Some((r, pos)) = stack.pop() {
        if pos == target.len() {
            return false;
        }
        if !seen.insert((r, pos)) {
            continue;
        }
        for (b, t) in &right.succ[r as usize] {
            if !b.is_visible() {
                stack.push((*t, pos));
            } else if b.same_visible(&target[pos]) {
                stack.push((*t, pos + 1));
            }
        }
    }
    true
}

/// True if no path of `right` has the same call/return projection as `path`.
/// The search runs on the fly and only visits states that follow the path,
/// so it stays usable when the full reachable graph of `right` is not.
/// Fails with `BudgetExceeded` after `ceiling` visited pairs.
pub fn lazy_no_weak_match<R: Lts>(path: &[Action], right: &R, ceiling: usize) -> Result<bool> {
    let target: Vec<Action> = path.iter().filter(|a| a.is_visible()).copied().collect();
    let start = (right.initial(), 0usize);
    let mut seen = FxHashSet::default();
    seen.insert(start.clone());
    let mut stack = vec![start];
    while let Some((r, pos)) = stack.pop() {
        if pos == target.len() {
            return Ok(false);
        }
        for (b, t) in right.successors(&r)? {
            let next = if !b.is_visible() {
                (t, pos)
            } else if b.same_visible(&target[pos]) {
                (t, pos + 1)
            } else {
                continue;
            };
            if !seen.contains(&next) {
                if seen.len() >= ceiling {
                    return Err(Error::BudgetExceeded { ceiling });
                }
                seen.insert(next.clone());
                stack.push(next);
            }
        }
    }
    Ok(true)
}
