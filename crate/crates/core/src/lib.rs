//! Expressibility estimation for random parameterized quantum circuits.
//!
//! The crate covers the whole pipeline: gatewise random circuit generation
//! ([`circuit`]), exact statevector and density-matrix simulation ([`sim`]),
//! the four expressibility labels ([`expressibility`]), DAG encoding of
//! circuits ([`graph`]), a small from-scratch transformer regressor
//! ([`nanoformer`]), evaluation measures ([`metrics`]) and the file-based
//! stages driven by the `pqcx` binary ([`pipeline`]).

pub mod circuit;
pub mod error;
pub mod expressibility;
pub mod graph;
pub mod metrics;
pub mod nanoformer;
pub mod pipeline;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
