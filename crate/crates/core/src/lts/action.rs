use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

/// A data token exchanged with an object: a call argument or a return value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Val {
    /// No argument (e.g. `deq()`).
    Unit,
    Int(i64),
    /// Acknowledgement returned by mutators such as `enq` or `write`.
    Ack,
    /// Returned by `deq`/`pop` on an empty container.
    Empty,
}

impl Val {
    pub fn parse(s: &str) -> Option<Val> {
        match s {
            "" => Some(Val::Unit),
            "ack" => Some(Val::Ack),
            "empty" => Some(Val::Empty),
            _ => s.parse().ok().map(Val::Int),
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Unit => Ok(()),
            Val::Int(i) => write!(f, "{i}"),
            Val::Ack => f.write_str("ack"),
            Val::Empty => f.write_str("empty"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Call,
    Return,
    Internal,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Call => "call",
            ActionKind::Return => "return",
            ActionKind::Internal => "internal",
        }
    }
}

/// A transition label. Process ids are 1-based; `pid == 0` means "no process"
/// and only occurs on spec-level internal steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub kind: ActionKind,
    pub pid: u8,
    pub method: &'static str,
    pub payload: Val,
    pub label: &'static str,
}

impl Action {
    pub fn call(pid: u8, method: &'static str, arg: Val) -> Action {
        Action {
            kind: ActionKind::Call,
            pid,
            method,
            payload: arg,
            label: "",
        }
    }

    pub fn ret(pid: u8, method: &'static str, value: Val) -> Action {
        Action {
            kind: ActionKind::Return,
            pid,
            method,
            payload: value,
            label: "",
        }
    }

    pub fn internal(pid: u8, label: &'static str) -> Action {
        Action {
            kind: ActionKind::Internal,
            pid,
            method: "",
            payload: Val::Unit,
            label,
        }
    }

    pub fn is_visible(&self) -> bool {
        self.kind != ActionKind::Internal
    }

    pub fn is_call(&self) -> bool {
        self.kind == ActionKind::Call
    }

    pub fn is_return(&self) -> bool {
        self.kind == ActionKind::Return
    }

    /// Equality up to the label, which carries no observable meaning.
    pub fn same_visible(&self, other: &Action) -> bool {
        self.kind == other.kind
            && self.pid == other.pid
            && self.method == other.method
            && self.payload == other.payload
    }

    /// A call and a return match when they share process and method.
    pub fn matches(&self, ret: &Action) -> bool {
        self.is_call() && ret.is_return() && self.pid == ret.pid && self.method == ret.method
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActionKind::Call => write!(f, "call(P{},{},{})", self.pid, self.method, self.payload),
            ActionKind::Return => write!(f, "ret(P{},{},{})", self.pid, self.method, self.payload),
            ActionKind::Internal if self.pid == 0 => write!(f, "{}", self.label),
            ActionKind::Internal => write!(f, "P{}:{}", self.pid, self.label),
        }
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Action", 5)?;
        st.serialize_field("kind", self.kind.as_str())?;
        st.serialize_field("pid", &self.pid)?;
        st.serialize_field("method", self.method)?;
        st.serialize_field("payload", &self.payload.to_string())?;
        st.serialize_field("label", self.label)?;
        st.end()
    }
}

/// Projection onto call/return actions.
pub fn visible(actions: &[Action]) -> Vec<Action> {
    actions.iter().filter(|a| a.is_visible()).copied().collect()
}

pub fn format_trace(actions: &[Action]) -> String {
    if actions.is_empty() {
        return "ε".to_string();
    }
    actions
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join("·")
}
