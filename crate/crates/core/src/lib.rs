//! Detection of genuine multipartite entanglement in three-qubit states.
//!
//! The crate covers the whole pipeline: random state ensembles and their
//! Pauli features ([`states`]), ground-truth labels from the witness SDP for
//! the renormalized genuine multipartite negativity ([`sdp`]), a kernel SVM
//! trained by SMO with cross-validation and feature screening ([`svm`]), safe
//! semi-supervised prediction with grouped iterative protocols and
//! trace-distance active learning ([`s4vm`]), and the experiment drivers
//! behind the command-line tool ([`pipeline`]).

pub mod error;
pub mod label;
pub mod numerics;
pub mod pipeline;
pub mod s4vm;
pub mod sdp;
pub mod states;
pub mod svm;
pub mod tolerance;

pub use error::{Error, Result};
pub use label::Label;
pub use tolerance::Tolerances;
