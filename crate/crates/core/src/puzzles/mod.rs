//! One-way puzzles from oracle circuits: the hybrid chain, the simulator
//! `Q*`, the solver `F`, auxiliary-input samplers and advantage measurement.

mod adversary;
mod hybrid;
mod replacement;
mod sampler;

pub use adversary::{
    make_adversary, AdvContext, Adversary, AdversaryKind, Custom, Oblivious, Perfect, Rejection,
};
pub use hybrid::{
    adversary_step_law, hybrid_b, hybrid_b_exact, hybrid_report, per_step_sd, q_star,
    q_star_exact, solver_f, solver_law, HybridReport, PerStepSd, QStarBackend,
};
pub use replacement::{
    adaptive_replacement_hybrid, replacement_law, replacement_report, ReplacementReport,
};
pub use sampler::{
    advantage, aux_samp, completed_law, encode_aux_input, instance_advantage, parse_aux_input,
    samp_from_instance, AdvantageMode, AdvantageReport, ConstantAnswer, ExactConditional,
    InstancePuzzle, LawPuzzle, LiftedAdversary, PuzzleAdversary, PuzzleSampler, SupportVerifier,
    LEN_WIDTH, STEP_WIDTH,
};
