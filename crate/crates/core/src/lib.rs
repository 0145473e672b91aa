//! Storing unitaries with self-inverse generators in single-qubit angle
//! states, retrieving them through the `G_B` gate array, correcting failures
//! by angle doubling, and distributing whole programs between two parties.

pub mod cli;
pub mod codec;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod protocol;
pub mod retrieval;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
