//! Deterministic, non-blocking sequential specifications.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::histories::{History, OpRecord};
use crate::lts::{Action, Val};
use crate::{Error, Result};

/// Abstract state of a specification: a sequence of values (queue or stack
/// contents, or the single register value).
pub type SpecState = Vec<Val>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MethodSig {
    pub name: &'static str,
    pub takes_arg: bool,
}

type StepRel = dyn Fn(&SpecState, &'static str, Val) -> Vec<(Val, SpecState)> + Send + Sync;

/// A sequential specification given as a transition relation over abstract
/// states. Well-formed specs have exactly one transition per
/// (state, method, argument); [`validate_spec`] checks this.
#[derive(Clone)]
pub struct SeqSpec {
    pub name: String,
    pub methods: Vec<MethodSig>,
    pub values: Vec<Val>,
    pub initial: SpecState,
    rel: Arc<StepRel>,
}

impl fmt::Debug for SeqSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeqSpec")
            .field("name", &self.name)
            .field("methods", &self.methods)
            .field("values", &self.values)
            .finish()
    }
}

pub fn default_values() -> Vec<Val> {
    vec![Val::Int(1), Val::Int(2)]
}

impl SeqSpec {
    pub fn new(
        name: impl Into<String>,
        methods: Vec<MethodSig>,
        values: Vec<Val>,
        initial: SpecState,
        rel: impl Fn(&SpecState, &'static str, Val) -> Vec<(Val, SpecState)> + Send + Sync + 'static,
    ) -> SeqSpec {
        SeqSpec {
            name: name.into(),
            methods,
            values,
            initial,
            rel: Arc::new(rel),
        }
    }

    pub fn transitions(
        &self,
        state: &SpecState,
        method: &'static str,
        arg: Val,
    ) -> Vec<(Val, SpecState)> {
        (self.rel)(state, method, arg)
    }

    /// The unique transition. Panics on specs that fail [`validate_spec`].
    pub fn step(&self, state: &SpecState, method: &'static str, arg: Val) -> (Val, SpecState) {
        let mut ts = self.transitions(state, method, arg);
        assert_eq!(
            ts.len(),
            1,
            "{}: {method}({arg}) is not deterministic and total",
            self.name
        );
        ts.pop().unwrap()
    }

    pub fn method(&self, name: &str) -> Option<&'static str> {
        self.methods.iter().find(|m| m.name == name).map(|m| m.name)
    }

    /// Every `(method, argument)` pair a client may invoke.
    pub fn invocations(&self) -> Vec<(&'static str, Val)> {
        let mut out = Vec::new();
        for m in &self.methods {
            if m.takes_arg {
                out.extend(self.values.iter().map(|&v| (m.name, v)));
            } else {
                out.push((m.name, Val::Unit));
            }
        }
        out
    }

    /// Replays `ops` from the initial state; `None` if some recorded return
    /// value disagrees with the specification.
    pub fn replay(
        &self,
        ops: impl IntoIterator<Item = (&'static str, Val, Val)>,
    ) -> Option<SpecState> {
        let mut s = self.initial.clone();
        for (m, a, r) in ops {
            let (ret, next) = self.step(&s, m, a);
            if ret != r {
                return None;
            }
            s = next;
        }
        Some(s)
    }

    /// Membership of a sequence of completed operations.
    pub fn accepts(&self, ops: &[OpRecord]) -> bool {
        ops.iter().all(|o| o.ret.is_some())
            && self
                .replay(ops.iter().map(|o| (o.method, o.arg, o.ret.unwrap())))
                .is_some()
    }

    pub fn same_alphabet(&self, other: &SeqSpec) -> bool {
        self.invocations() == other.invocations()
    }
}

/// FIFO queue. `deq` on an empty queue returns [`Val::Empty`].
pub fn queue_spec(values: &[Val]) -> SeqSpec {
    assert!(!values.is_empty(), "value domain must be nonempty");
    SeqSpec::new(
        "queue",
        vec![
            MethodSig {
                name: "enq",
                takes_arg: true,
            },
            MethodSig {
                name: "deq",
                takes_arg: false,
            },
        ],
        values.to_vec(),
        Vec::new(),
        |s, m, a| match m {
            "enq" => {
                let mut t = s.clone();
                t.push(a);
                vec![(Val::Ack, t)]
            }
            "deq" if s.is_empty() => vec![(Val::Empty, s.clone())],
            "deq" => vec![(s[0], s[1..].to_vec())],
            _ => Vec::new(),
        },
    )
}

/// LIFO stack. `pop` on an empty stack returns [`Val::Empty`].
pub fn stack_spec(values: &[Val]) -> SeqSpec {
    assert!(!values.is_empty(), "value domain must be nonempty");
    SeqSpec::new(
        "stack",
        vec![
            MethodSig {
                name: "push",
                takes_arg: true,
            },
            MethodSig {
                name: "pop",
                takes_arg: false,
            },
        ],
        values.to_vec(),
        Vec::new(),
        |s, m, a| match m {
            "push" => {
                let mut t = s.clone();
                t.push(a);
                vec![(Val::Ack, t)]
            }
            "pop" => match s.split_last() {
                None => vec![(Val::Empty, s.clone())],
                Some((top, rest)) => vec![(*top, rest.to_vec())],
            },
            _ => Vec::new(),
        },
    )
}

/// Read/write register, initially 0.
pub fn register_spec(values: &[Val]) -> SeqSpec {
    assert!(!values.is_empty(), "value domain must be nonempty");
    SeqSpec::new(
        "register",
        vec![
            MethodSig {
                name: "write",
                takes_arg: true,
            },
            MethodSig {
                name: "read",
                takes_arg: false,
            },
        ],
        values.to_vec(),
        vec![Val::Int(0)],
        |s, m, a| match m {
            "write" => vec![(Val::Ack, vec![a])],
            "read" => vec![(s[0], s.clone())],
            _ => Vec::new(),
        },
    )
}

pub fn spec_by_name(name: &str, values: &[Val]) -> Result<SeqSpec> {
    match name {
        "queue" => Ok(queue_spec(values)),
        "stack" => Ok(stack_spec(values)),
        "register" => Ok(register_spec(values)),
        other => Err(Error::UnknownSpec(other.to_string())),
    }
}

pub const SPEC_NAMES: [&str; 3] = ["queue", "stack", "register"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecViolation {
    /// No transition for this invocation.
    Blocking {
        state: SpecState,
        method: &'static str,
        arg: Val,
    },
    /// More than one transition for this invocation.
    Nondeterministic {
        state: SpecState,
        method: &'static str,
        arg: Val,
        outcomes: Vec<(Val, SpecState)>,
    },
}

/// Checks determinism and totality on every state reachable within `depth`
/// operations.
pub fn validate_spec(spec: &SeqSpec, depth: usize) -> std::result::Result<(), SpecViolation> {
    let invocations = spec.invocations();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([(spec.initial.clone(), 0usize)]);
    seen.insert(spec.initial.clone());
    while let Some((s, d)) = queue.pop_front() {
        for &(m, a) in &invocations {
            let ts = spec.transitions(&s, m, a);
            match ts.len() {
                0 => {
                    return Err(SpecViolation::Blocking {
                        state: s,
                        method: m,
                        arg: a,
                    })
                }
                1 => {}
                _ => {
                    return Err(SpecViolation::Nondeterministic {
                        state: s,
                        method: m,
                        arg: a,
                        outcomes: ts,
                    })
                }
            }
            if d < depth {
                let next = ts.into_iter().next().unwrap().1;
                if seen.insert(next.clone()) {
                    queue.push_back((next, d + 1));
                }
            }
        }
    }
    Ok(())
}

/// Sequential history with one call·return pair per operation, issued by the
/// given processes.
pub fn to_history(ops: &[(&'static str, Val, Val)], pids: &[u8]) -> History {
    assert_eq!(ops.len(), pids.len(), "one pid per operation");
    let mut actions = Vec::with_capacity(2 * ops.len());
    for (&(m, a, r), &p) in ops.iter().zip(pids) {
        actions.push(Action::call(p, m, a));
        actions.push(Action::ret(p, m, r));
    }
    History::new(&actions).expect("sequential histories are well formed")
}
