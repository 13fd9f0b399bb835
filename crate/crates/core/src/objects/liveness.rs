use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value as Json};

use super::semantics::Config;
use crate::lts::{Action, ReachGraph, StateId};
use crate::search::scc;
use crate::Result;

/// States that know which processes have a pending operation.
pub trait PendingView {
    fn pending(&self) -> u64;
}

impl PendingView for Config {
    fn pending(&self) -> u64 {
        Config::pending(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Liveness {
    WaitFree,
    LockFree,
    ObstructionFree,
}

impl Liveness {
    pub const ALL: [Liveness; 3] = [
        Liveness::WaitFree,
        Liveness::LockFree,
        Liveness::ObstructionFree,
    ];

    pub fn short(self) -> &'static str {
        match self {
            Liveness::WaitFree => "wf",
            Liveness::LockFree => "lf",
            Liveness::ObstructionFree => "of",
        }
    }
}

impl fmt::Display for Liveness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Liveness {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "wf" | "wait-free" => Ok(Liveness::WaitFree),
            "lf" | "lock-free" => Ok(Liveness::LockFree),
            "of" | "obstruction-free" => Ok(Liveness::ObstructionFree),
            other => Err(format!(
                "unknown liveness property `{other}` (expected wf, lf or of)"
            )),
        }
    }
}

/// An infinite execution: `stem` from the initial state, then `cycle`
/// repeated forever.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lasso {
    pub stem: Vec<Action>,
    pub cycle: Vec<Action>,
    /// The starved process, for the per-process properties.
    pub process: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LivenessVerdict {
    HoldsAtBound,
    Violated(Lasso),
}

impl LivenessVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, LivenessVerdict::HoldsAtBound)
    }

    pub fn to_json(&self) -> Json {
        match self {
            LivenessVerdict::HoldsAtBound => json!({"holds": true}),
            LivenessVerdict::Violated(l) => json!({
                "holds": false,
                "lasso": {"stem": l.stem, "cycle": l.cycle, "process": l.process},
            }),
        }
    }
}

/// Looks for a lasso violating `kind` on the explored graph.
///
/// - wait-freedom fails if some process stays pending on a cycle on which it
///   takes steps;
/// - lock-freedom fails if some cycle has a pending operation and no return;
/// - obstruction-freedom fails if some cycle consists only of steps of one
///   pending process.
///
/// Calls are counted in the state, so cycles never contain calls and the
/// pending set is constant along a cycle.
pub fn classify_liveness<S: PendingView>(
    g: &ReachGraph<S>,
    kind: Liveness,
) -> Result<LivenessVerdict> {
    g.require_complete()?;
    let all = g.states.iter().fold(0u64, |m, s| m | s.pending());
    let found = match kind {
        Liveness::WaitFree => (0..64).filter(|p| all & (1 << p) != 0).find_map(|p| {
            let pid = p as u8 + 1;
            find_lasso(
                g,
                &|s: &S| s.pending() & (1 << p) != 0,
                &|a: &Action| !a.is_return(),
                &|a: &Action| !a.is_visible() && a.pid == pid,
            )
            .map(|(stem, cycle)| Lasso {
                stem,
                cycle,
                process: Some(pid),
            })
        }),
        Liveness::LockFree => find_lasso(
            g,
            &|s: &S| s.pending() != 0,
            &|a: &Action| !a.is_return(),
            &|_| true,
        )
        .map(|(stem, cycle)| Lasso {
            stem,
            cycle,
            process: None,
        }),
        Liveness::ObstructionFree => (0..64).filter(|p| all & (1 << p) != 0).find_map(|p| {
            let pid = p as u8 + 1;
            find_lasso(
                g,
                &|s: &S| s.pending() & (1 << p) != 0,
                &|a: &Action| !a.is_visible() && a.pid == pid,
                &|_| true,
            )
            .map(|(stem, cycle)| Lasso {
                stem,
                cycle,
                process: Some(pid),
            })
        }),
    };
    Ok(found.map_or(LivenessVerdict::HoldsAtBound, LivenessVerdict::Violated))
}

/// First edge (in state and edge order) lying on a cycle of the subgraph
/// induced by `state_ok` and `edge_ok` and satisfying `required`, returned as
/// a shortest stem plus a cycle through that edge.
fn find_lasso<S>(
    g: &ReachGraph<S>,
    state_ok: &dyn Fn(&S) -> bool,
    edge_ok: &dyn Fn(&Action) -> bool,
    required: &dyn Fn(&Action) -> bool,
) -> Option<(Vec<Action>, Vec<Action>)> {
    let n = g.len();
    let keep: Vec<bool> = g.states.iter().map(state_ok).collect();
    let keep = &keep;
    let edges = |s: usize| {
        g.succ[s]
            .iter()
            .enumerate()
            .filter(move |(_, (a, t))| keep[s] && keep[*t as usize] && edge_ok(a))
    };
    let comp = scc(n, &|s| edges(s).map(|(_, &(_, t))| t as usize).collect());
    for s in 0..n {
        for (_, &(a, t)) in edges(s) {
            if comp[s] != comp[t as usize] || !required(&a) {
                continue;
            }
            // Path t -> s inside the component.
            let mut parent: Vec<Option<(StateId, Action)>> = vec![None; n];
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([t as usize]);
            seen[t as usize] = true;
            while let Some(x) = queue.pop_front() {
                if x == s {
                    break;
                }
                for (_, &(b, y)) in edges(x) {
                    if comp[y as usize] == comp[s] && !seen[y as usize] {
                        seen[y as usize] = true;
                        parent[y as usize] = Some((x as StateId, b));
                        queue.push_back(y as usize);
                    }
                }
            }
            let mut back = Vec::new();
            let mut x = s;
            while x != t as usize {
                let (p, b) = parent[x].expect("states of one component are mutually reachable");
                back.push(b);
                x = p as usize;
            }
            back.reverse();
            let mut cycle = vec![a];
            cycle.extend(back);
            let stem = g.path_to(&g.bfs_parents(), s as StateId);
            return Some((stem, cycle));
        }
    }
    None
}
