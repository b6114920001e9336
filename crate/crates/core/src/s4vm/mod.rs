//! Safe semi-supervised SVM.

pub mod active;
pub mod candidates;
pub mod grouping;
pub mod protocol;
pub mod safe;
pub mod tuning;

pub use active::{active_select, mean_trace_distances};
pub use candidates::{generate_candidates, overlap, s3vm_objective, CandidateSeparator, CandidateSet, S4vmConfig};
pub use grouping::{random_plan, renewal_plan, GroupingPlan, GroupingStrategy, Protocol};
pub use protocol::{iterative_predict, run_protocol, s4vm_predict, GroupResult, S4vmPrediction, SemisupRun};
pub use safe::{minimax_value, safe_assign, SafeAssignment};
pub use tuning::s4vm_cross_validate;
