//! The non-collapsing measurement oracle: single draws, exact joint laws,
//! prefix-conditioned samplers and stateless adaptive sessions.

mod adaptive;
mod oracle;

pub use adaptive::{
    adaptive_session, adaptive_session_routed, decision_as_sampling, session_law,
    session_law_routed, BaseMachine, FnMachine, MachineStep, OracleBackend, PdqpInstanceFamily,
    Route, TrueOracle,
};
pub use oracle::{
    branch_law, oracle_exact, oracle_exact_from, oracle_sample, q1, q1_law, q2, q2_law, q_t,
    q_t_exact, q_t_exact_from, OracleOutput, Policy, DEFAULT_RETRY_BUDGET, MAX_EXACT_BITS,
};
