//! Semidefinite programming: a generic block-diagonal interior-point solver
//! and the witness program for the renormalized GMN.

pub mod gmn;
pub mod problem;
pub mod solver;

pub use gmn::{
    build_gmn_sdp, label_state, label_state_with, renormalized_gmn, renormalized_gmn_with, verify_certificate,
    GmnResult, LabeledState, WitnessCertificate,
};
pub use problem::{Constraint, SdpProblem};
pub use solver::{solve_sdp, solve_sdp_from, InitialPoint, SdpSolution, SolveStatus, SolverConfig};
