//! Numerical tolerances shared by every module.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest `|H - H^dagger|` entry absorbed by symmetrization.
    pub hermitian: f64,
    /// Bound on eigen-reconstruction residuals, relative to the input norm.
    pub eig_residual: f64,
    /// Hermiticity, trace and positivity slack for density matrices.
    pub density: f64,
    /// GMN values above this are labeled genuinely entangled.
    pub label_threshold: f64,
    /// Slack for auditing witness certificates.
    pub certificate: f64,
    /// Required relative duality gap for an `optimal` SDP status.
    pub duality_gap: f64,
    /// Required primal/dual infeasibility for an `optimal` SDP status.
    pub feasibility: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        hermitian: 1e-12,
        eig_residual: 1e-10,
        density: 1e-10,
        label_threshold: 1e-6,
        certificate: 1e-7,
        duality_gap: 1e-6,
        feasibility: 1e-8,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
