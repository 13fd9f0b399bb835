//! Labelled transition systems, bounded exploration and weak forward
//! simulation with call/return actions visible.

mod action;
mod graph;
mod reduce;
mod sim;

pub use action::{format_trace, visible, Action, ActionKind, Val};
pub use graph::{
    explore, history_set, trace_set, trace_set_upto, ReachGraph, TruncReason, Truncated,
};
pub use reduce::{quotient, Quotient};
pub use sim::{
    check_simulation, check_simulation_graphs, check_simulation_reduced, compose_witness,
    confirm_no_weak_match, identity_witness, lazy_no_weak_match, validate_witness, Counterexample,
    Guide, Move, SimOutcome, SimWitness, Violation,
};

use std::fmt::Debug;
use std::hash::Hash;

use crate::Result;

pub type StateId = u32;

/// Canonical, structural encoding of a state. Two states are equal iff their
/// encodings are equal.
pub trait StateEncode {
    fn encode(&self) -> String;
}

impl StateEncode for u32 {
    fn encode(&self) -> String {
        self.to_string()
    }
}

/// A rooted, finitely branching LTS given by a successor function.
///
/// `successors` must be a deterministic function of the state: the same state
/// yields the same list in the same order.
pub trait Lts {
    type State: Clone + Eq + Hash + Debug + StateEncode + Send + Sync;

    fn initial(&self) -> Self::State;

    fn successors(&self, s: &Self::State) -> Result<Vec<(Action, Self::State)>>;

    /// Number of call actions on any path from the initial state to `s`.
    /// Systems that can be explored under a call bound carry it in the state.
    fn call_count(&self, s: &Self::State) -> usize;
}

/// Exploration bound: at most `max_calls` call actions per trace, at most
/// `internal_budget` consecutive internal steps, at most `state_ceiling`
/// states in total.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bound {
    pub max_calls: usize,
    pub internal_budget: usize,
    pub state_ceiling: usize,
}

impl Bound {
    pub const DEFAULT_INTERNAL_BUDGET: usize = 64;
    pub const DEFAULT_STATE_CEILING: usize = 5_000_000;

    pub fn calls(max_calls: usize) -> Bound {
        Bound {
            max_calls,
            internal_budget: Self::DEFAULT_INTERNAL_BUDGET,
            state_ceiling: Self::DEFAULT_STATE_CEILING,
        }
    }

    pub fn with_ceiling(mut self, ceiling: usize) -> Bound {
        self.state_ceiling = ceiling;
        self
    }

    pub fn with_internal_budget(mut self, budget: usize) -> Bound {
        self.internal_budget = budget;
        self
    }
}
