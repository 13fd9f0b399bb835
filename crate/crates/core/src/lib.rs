//! Bounded exploration of concurrent objects under a most-general client,
//! with checkers for linearizability, strong linearizability and weak
//! forward simulation where calls and returns are the visible actions.

pub mod casestudies;
pub mod cli;
pub mod error;
pub mod histories;
pub mod lattice;
pub mod lts;
pub mod objects;
pub(crate) mod search;
pub mod seqspec;
pub mod universal;

pub use error::{Error, Result};
