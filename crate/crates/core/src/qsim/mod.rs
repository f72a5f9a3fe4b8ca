//! Dense statevector simulation with collapsing measurements of a qubit
//! prefix and exact enumeration of collapsing branches.

mod branch;
mod circuit;
mod gate;
mod state;

pub use branch::{
    enumerate_branches, enumerate_branches_with, max_branches, set_max_branches, BranchNode,
    BranchTree, DEFAULT_MAX_BRANCHES, MAX_STORED_AMPLITUDES,
};
pub use circuit::{
    apply_unitary, bell_circuit, random_circuit, run_prefix, Circuit, CircuitJson, Step,
    StepJson, Transcript,
};
pub use gate::{euler_unitary, Gate, GateJson, UNITARY_TOL};
pub use state::{StateVector, PRUNE_TOL};

pub(crate) use state::sample_outcome;

/// Hard cap on the register size.
pub const MAX_QUBITS: usize = 12;
