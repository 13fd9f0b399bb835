use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("state ceiling exceeded: more than {ceiling} reachable states")]
    BudgetExceeded { ceiling: usize },

    #[error(
        "internal budget exhausted: a state needs more than {budget} consecutive internal steps"
    )]
    InternalBudgetExhausted { budget: usize },

    #[error("trace set is infinite: the graph has a cycle")]
    InfiniteTraceSet,

    #[error("malformed history: {0}")]
    MalformedHistory(String),

    #[error("ill-formed program: {0}")]
    IllFormedProgram(String),

    #[error("unknown mutation `{0}`")]
    UnknownMutation(String),

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("unknown specification `{0}`")]
    UnknownSpec(String),

    #[error("unknown relation guide `{0}`")]
    UnknownGuide(String),

    #[error("method alphabets differ: {0}")]
    AlphabetMismatch(String),

    #[error("invalid specification: {0}")]
    SpecInvalid(String),

    #[error("no linearization satisfies the node constraints: {0}")]
    NoLinearization(String),

    #[error("incompatible witnesses: {0}")]
    IncompatibleWitnesses(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
