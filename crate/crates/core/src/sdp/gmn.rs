//! Witness SDP for the renormalized genuine multipartite negativity.
//!
//! The program is `N_g(rho) = -min Tr(W rho)` over witnesses that decompose
//! as `W = P_a + Q_a^{T_a}` for every single-qubit cut `a`, with
//! `P_a >= 0` and `0 <= Q_a <= 1`. It is posed in dual standard form: the
//! free coordinates are `W, Q_A, Q_B, Q_C` in an orthonormal Hermitian basis
//! and the nine cone blocks are the realified slacks
//! `P_a = W - Q_a^{T_a}`, `Q_a`, and `S_a = 1 - Q_a`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::problem::{sparse_entries, Constraint, SdpProblem};
use super::solver::{solve_sdp_from, InitialPoint, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::numerics::{self, c64, realify_unchecked, ComplexMatrix, RealMatrix};
use crate::states::{partial_transpose_matrix, Bipartition, DensityMatrix, DIM};

/// Real coordinates of an 8x8 Hermitian matrix.
pub const HERMITIAN_COORDS: usize = DIM * DIM;
/// Number of cone blocks in the witness program.
pub const NUM_BLOCKS: usize = 9;
/// Side of each realified block.
pub const BLOCK_DIM: usize = 2 * DIM;

/// Orthonormal basis of `n x n` Hermitian matrices under `Re Tr(A B)`:
/// diagonal units first, then the real and imaginary off-diagonal pairs.
pub fn hermitian_basis_of(n: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(n * n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..n {
        let mut m = ComplexMatrix::zeros(n, n);
        m[(k, k)] = c64(1.0, 0.0);
        out.push(m);
    }
    for k in 0..n {
        for l in (k + 1)..n {
            let mut re = ComplexMatrix::zeros(n, n);
            re[(k, l)] = c64(s, 0.0);
            re[(l, k)] = c64(s, 0.0);
            out.push(re);
            let mut im = ComplexMatrix::zeros(n, n);
            im[(k, l)] = c64(0.0, s);
            im[(l, k)] = c64(0.0, -s);
            out.push(im);
        }
    }
    out
}

pub fn hermitian_basis() -> &'static [ComplexMatrix] {
    static BASIS: OnceLock<Vec<ComplexMatrix>> = OnceLock::new();
    BASIS.get_or_init(|| hermitian_basis_of(DIM))
}

fn coords_in(basis: &[ComplexMatrix], h: &ComplexMatrix) -> Vec<f64> {
    basis.iter().map(|e| numerics::trace_product_re(e, h)).collect()
}

fn from_coords_in(basis: &[ComplexMatrix], coords: &[f64]) -> ComplexMatrix {
    let n = basis[0].nrows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (e, &v) in basis.iter().zip(coords) {
        if v != 0.0 {
            out += e.scale(v);
        }
    }
    out
}

pub fn hermitian_coords(h: &ComplexMatrix) -> Vec<f64> {
    coords_in(hermitian_basis(), h)
}

pub fn hermitian_from_coords(coords: &[f64]) -> ComplexMatrix {
    from_coords_in(hermitian_basis(), coords)
}

/// Block positions in the witness program.
pub fn p_block(cut: Bipartition) -> usize {
    cut.index()
}
pub fn q_block(cut: Bipartition) -> usize {
    3 + cut.index()
}
pub fn s_block(cut: Bipartition) -> usize {
    6 + cut.index()
}

/// Coordinate offset of `W` (None) or `Q_a` inside `y`.
pub fn coord_offset(cut: Option<Bipartition>) -> usize {
    match cut {
        None => 0,
        Some(c) => HERMITIAN_COORDS * (1 + c.index()),
    }
}

fn template() -> &'static SdpProblem {
    static TEMPLATE: OnceLock<SdpProblem> = OnceLock::new();
    TEMPLATE.get_or_init(|| {
        let basis = hermitian_basis();
        let mut constraints = Vec::with_capacity(4 * HERMITIAN_COORDS);
        // W coordinates: Z_{P_a} = W - ... => A_{P_a} = -R(E_k)
        for e in basis {
            let neg = sparse_entries(&realify_unchecked(&(-e)));
            let parts = Bipartition::ALL.iter().map(|&cut| (p_block(cut), neg.clone())).collect();
            constraints.push(Constraint { parts });
        }
        for cut in Bipartition::ALL {
            for e in basis {
                let pt = sparse_entries(&realify_unchecked(&partial_transpose_matrix(e, cut)));
                let neg = sparse_entries(&realify_unchecked(&(-e)));
                let pos = sparse_entries(&realify_unchecked(e));
                constraints.push(Constraint {
                    parts: vec![(p_block(cut), pt), (q_block(cut), neg), (s_block(cut), pos)],
                });
            }
        }
        let mut c = vec![RealMatrix::zeros(BLOCK_DIM, BLOCK_DIM); NUM_BLOCKS];
        for cut in Bipartition::ALL {
            c[s_block(cut)] = RealMatrix::identity(BLOCK_DIM, BLOCK_DIM);
        }
        SdpProblem {
            block_dims: vec![BLOCK_DIM; NUM_BLOCKS],
            c,
            constraints,
            b: vec![0.0; 4 * HERMITIAN_COORDS],
        }
    })
}

/// The witness program for `rho`; only the objective vector depends on the
/// state.
pub fn build_gmn_sdp(rho: &DensityMatrix) -> SdpProblem {
    let mut p = template().clone();
    let coords = hermitian_coords(rho.matrix());
    for (bk, ck) in p.b.iter_mut().zip(coords) {
        *bk = -ck;
    }
    p
}

/// Eigenvalues of `rho` at or below this are treated as exact zeros.
pub const SUPPORT_CUTOFF: f64 = 1e-11;
/// Slack added on the support when a restricted witness is lifted back to
/// the full space. The certified value drops by exactly this amount.
pub const LIFT_MARGIN: f64 = 1e-7;

/// Witness program for a rank-deficient state. The `P_a` blocks are
/// compressed to `V^dagger (W - Q_a^{T_a}) V` with `V` an isometry onto the
/// support, so `W` is only coordinatized there. Without this the full
/// program has no strictly feasible primal point and the iteration stalls.
struct Restricted {
    problem: SdpProblem,
    /// Unitary whose first `rank` columns span the support.
    frame: ComplexMatrix,
    rank: usize,
    basis: Vec<ComplexMatrix>,
}

fn restricted_program(rho: &DensityMatrix) -> Result<Option<Restricted>> {
    let eig = numerics::hermitian_eig(rho.matrix())?;
    let kernel = eig.eigenvalues.iter().filter(|&&v| v <= SUPPORT_CUTOFF).count();
    if kernel == 0 {
        return Ok(None);
    }
    let rank = DIM - kernel;
    let mut frame = ComplexMatrix::zeros(DIM, DIM);
    for j in 0..DIM {
        frame.set_column(j, &eig.eigenvectors.column((j + kernel) % DIM));
    }
    let v = frame.columns(0, rank).into_owned();
    let vh = v.adjoint();
    let basis = hermitian_basis_of(rank);

    let mut constraints = Vec::with_capacity(rank * rank + 3 * HERMITIAN_COORDS);
    for e in &basis {
        let neg = sparse_entries(&realify_unchecked(&(-e)));
        let parts = Bipartition::ALL.iter().map(|&cut| (p_block(cut), neg.clone())).collect();
        constraints.push(Constraint { parts });
    }
    for cut in Bipartition::ALL {
        for e in hermitian_basis() {
            let pt = sparse_entries(&realify_unchecked(&(&vh * partial_transpose_matrix(e, cut) * &v)));
            let neg = sparse_entries(&realify_unchecked(&(-e)));
            let pos = sparse_entries(&realify_unchecked(e));
            constraints.push(Constraint {
                parts: vec![(p_block(cut), pt), (q_block(cut), neg), (s_block(cut), pos)],
            });
        }
    }
    let mut block_dims = vec![2 * rank; 3];
    block_dims.extend([BLOCK_DIM; 6]);
    let c = block_dims
        .iter()
        .enumerate()
        .map(|(i, &d)| if i >= 6 { RealMatrix::identity(d, d) } else { RealMatrix::zeros(d, d) })
        .collect();
    let mut b = vec![0.0; constraints.len()];
    for (bk, ck) in b.iter_mut().zip(coords_in(&basis, &(&vh * rho.matrix() * &v))) {
        *bk = -ck;
    }
    Ok(Some(Restricted {
        problem: SdpProblem { block_dims, c, constraints, b },
        frame,
        rank,
        basis,
    }))
}

/// Strictly feasible witness start: `W = 1`, `Q_a = 1/2`.
fn interior_start(p: &SdpProblem, w_basis: &[ComplexMatrix]) -> InitialPoint {
    let n = w_basis[0].nrows();
    let mut y = coords_in(w_basis, &ComplexMatrix::identity(n, n));
    let q = hermitian_coords(&ComplexMatrix::identity(DIM, DIM).scale(0.5));
    for _ in Bipartition::ALL {
        y.extend_from_slice(&q);
    }
    let z = p.dual_slack(&y);
    let x = p
        .block_dims
        .iter()
        .map(|&d| RealMatrix::identity(d, d).scale(0.5))
        .collect();
    InitialPoint { x, y, z }
}

fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn lift_certificate(y: &[f64], r: &Restricted, rho: &DensityMatrix) -> Result<WitnessCertificate> {
    let (rank, kernel) = (r.rank, DIM - r.rank);
    let w_len = rank * rank;
    let w_sup = from_coords_in(&r.basis, &y[..w_len]);
    let qs: Vec<ComplexMatrix> = (0..3)
        .map(|i| {
            let off = w_len + i * HERMITIAN_COORDS;
            hermitian_from_coords(&y[off..off + HERMITIAN_COORDS])
        })
        .collect();
    let fh = r.frame.adjoint();
    let rotated: Vec<ComplexMatrix> = Bipartition::ALL
        .iter()
        .zip(&qs)
        .map(|(&cut, q)| &fh * partial_transpose_matrix(q, cut) * &r.frame)
        .collect();

    let mut shift = 0.0f64;
    for m in &rotated {
        let top = hermitize(&(&w_sup - m.view((0, 0), (rank, rank))));
        shift = shift.max(-numerics::eigenvalues(&top)?[0]);
    }
    let w_top = &w_sup + ComplexMatrix::identity(rank, rank).scale(shift + LIFT_MARGIN);
    // P = [[w_top - A, -B], [-B^dagger, t - D]] is PSD once t exceeds the
    // top eigenvalue of D + B^dagger (w_top - A)^-1 B.
    let mut t = 0.0f64;
    for m in &rotated {
        let s = hermitize(&(&w_top - m.view((0, 0), (rank, rank))));
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Solver("singular support block while lifting witness".into()))?;
        let bk = m.view((0, rank), (rank, kernel));
        let schur = m.view((rank, rank), (kernel, kernel)) + bk.adjoint() * s_inv * bk;
        t = t.max(numerics::eigenvalues(&hermitize(&schur))?[kernel - 1]);
    }
    t += LIFT_MARGIN;

    let mut diag = ComplexMatrix::zeros(DIM, DIM);
    diag.view_mut((0, 0), (rank, rank)).copy_from(&w_top);
    for k in rank..DIM {
        diag[(k, k)] = c64(t, 0.0);
    }
    let w = hermitize(&(&r.frame * diag * &fh));
    Ok(WitnessCertificate::from_parts(w, qs, rho))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessCertificate {
    pub w: ComplexMatrix,
    /// `(P_a, Q_a)` for the cuts A|BC, B|AC, C|AB in that order.
    pub pairs: Vec<(ComplexMatrix, ComplexMatrix)>,
    /// `Tr(W rho)`.
    pub objective: f64,
}

impl WitnessCertificate {
    pub fn from_coordinates(y: &[f64], rho: &DensityMatrix) -> Self {
        let w = hermitian_from_coords(&y[..HERMITIAN_COORDS]);
        let qs = Bipartition::ALL
            .iter()
            .map(|&cut| {
                let off = coord_offset(Some(cut));
                hermitian_from_coords(&y[off..off + HERMITIAN_COORDS])
            })
            .collect();
        Self::from_parts(w, qs, rho)
    }

    /// Completes `W` and the three `Q_a` with `P_a = W - Q_a^{T_a}`.
    pub fn from_parts(w: ComplexMatrix, qs: Vec<ComplexMatrix>, rho: &DensityMatrix) -> Self {
        let pairs = Bipartition::ALL
            .iter()
            .zip(qs)
            .map(|(&cut, q)| (&w - partial_transpose_matrix(&q, cut), q))
            .collect();
        let objective = numerics::trace_product_re(&w, rho.matrix());
        Self { w, pairs, objective }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmnResult {
    /// `max(0, -Tr(W rho))` for the returned witness.
    pub value: f64,
    pub certificate: WitnessCertificate,
    pub duality_gap: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

pub fn renormalized_gmn(rho: &DensityMatrix) -> Result<GmnResult> {
    renormalized_gmn_with(rho, &SolverConfig::default())
}

pub fn renormalized_gmn_with(rho: &DensityMatrix, cfg: &SolverConfig) -> Result<GmnResult> {
    let (sol, certificate) = match restricted_program(rho)? {
        None => {
            let problem = build_gmn_sdp(rho);
            let start = interior_start(&problem, hermitian_basis());
            let sol = solve_sdp_from(&problem, cfg, Some(start))?;
            let certificate = WitnessCertificate::from_coordinates(&sol.y, rho);
            (sol, certificate)
        }
        Some(r) => {
            let start = interior_start(&r.problem, &r.basis);
            let sol = solve_sdp_from(&r.problem, cfg, Some(start))?;
            let certificate = lift_certificate(&sol.y, &r, rho)?;
            (sol, certificate)
        }
    };
    let value = (-certificate.objective).max(0.0);
    let duality_gap = (sol.primal_objective + certificate.objective).abs();
    let mut status = sol.status;
    if status == SolveStatus::Optimal
        && (duality_gap > cfg.tolerances.duality_gap
            || !verify_certificate(&certificate, rho, cfg.tolerances.certificate))
    {
        status = SolveStatus::InfeasibleNumerics;
    }
    Ok(GmnResult {
        value,
        certificate,
        duality_gap,
        status,
        iterations: sol.iterations,
    })
}

/// Solver-independent audit of a witness certificate.
pub fn verify_certificate(cert: &WitnessCertificate, rho: &DensityMatrix, tol: f64) -> bool {
    let check = || -> Result<bool> {
        if cert.pairs.len() != 3 || numerics::hermiticity_residual(&cert.w) > tol {
            return Ok(false);
        }
        for (cut, (p, q)) in Bipartition::ALL.iter().zip(&cert.pairs) {
            if numerics::hermiticity_residual(p) > tol || numerics::hermiticity_residual(q) > tol {
                return Ok(false);
            }
            let p_vals = numerics::eigenvalues(p)?;
            let q_vals = numerics::eigenvalues(q)?;
            if p_vals[0] < -tol || q_vals[0] < -tol || q_vals[DIM - 1] > 1.0 + tol {
                return Ok(false);
            }
            let residual = (&cert.w - p - partial_transpose_matrix(q, *cut)).norm();
            if residual > tol {
                return Ok(false);
            }
        }
        let objective = numerics::trace_product_re(&cert.w, rho.matrix());
        Ok((objective - cert.objective).abs() <= tol)
    };
    check().unwrap_or(false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledState {
    pub label: Label,
    pub gmn: GmnResult,
}

/// `-1` (genuinely entangled) iff `N_g > threshold`, otherwise `+1`.
pub fn label_from_value(value: f64, threshold: f64) -> Label {
    if value > threshold {
        Label::Negative
    } else {
        Label::Positive
    }
}

/// Labels a state from its certified GMN. Solves that do not reach
/// `optimal` are reported as errors so that callers discard the sample.
pub fn label_state(rho: &DensityMatrix) -> Result<LabeledState> {
    label_state_with(rho, &SolverConfig::default())
}

pub fn label_state_with(rho: &DensityMatrix, cfg: &SolverConfig) -> Result<LabeledState> {
    let gmn = renormalized_gmn_with(rho, cfg)?;
    if gmn.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "GMN solve ended with status {:?} after {} iterations (gap {:.3e})",
            gmn.status, gmn.iterations, gmn.duality_gap
        )));
    }
    let label = label_from_value(gmn.value, cfg.tolerances.label_threshold);
    Ok(LabeledState { label, gmn })
}
