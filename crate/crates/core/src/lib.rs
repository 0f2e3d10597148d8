//! Equivariant quantum circuits as Q-functions for TSP tour construction.
//!
//! A dense statevector simulator evaluates parameterized circuits built from
//! a partially annotated graph; the expectation `ε_{last,v} ⟨Z_last Z_v⟩`
//! scores candidate next nodes, and a DQN loop trains the circuit angles.
//! Classical baselines and a QAOA reference solver share the same graph
//! and tour types.

pub mod agent;
pub mod analytic;
pub mod ansatz;
pub mod baselines;
pub mod error;
pub mod graph;
pub mod qaoa;
pub mod simulator;
pub mod trainer;

pub use ansatz::{Ansatz, AnsatzKind, AnsatzProgram};
pub use error::{Error, Result};
pub use graph::{AnnotatedGraph, Instance, Tour, WeightedGraph};
pub use simulator::{Gate, Statevector};
