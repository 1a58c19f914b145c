//! Scalable dialogue state tracking over bounded per-slot candidate sets.

pub mod candidates;
pub mod corpus;
pub mod delex;
pub mod dialogue;
pub mod error;
pub mod evaluation;
pub mod neural;
pub mod rng;
pub mod training;
pub mod tracker;

pub use error::{Error, Result};
