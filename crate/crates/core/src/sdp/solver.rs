//! Infeasible primal-dual interior-point method for block-diagonal SDPs.
//!
//! Search directions use the HKM scaling with a Mehrotra predictor-corrector
//! step. The Schur complement `M_ij = <A_i, Z^-1 A_j X>` is assembled from
//! the sparse constraint entries block by block and factored densely.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use super::problem::{block_dot, block_norm, SdpProblem};
use crate::error::Result;
use crate::numerics::{symmetric_eigenvalues, RealMatrix};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative duality gap at which iteration stops.
    pub gap_target: f64,
    /// Primal and dual infeasibility at which iteration stops.
    pub feasibility_target: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Thresholds for reporting `Optimal`.
    pub tolerances: Tolerances,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 80,
            gap_target: 1e-9,
            feasibility_target: 1e-10,
            step_fraction: 0.98,
            tolerances: Tolerances::DEFAULT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    InfeasibleNumerics,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<RealMatrix>,
    pub y: Vec<f64>,
    pub z: Vec<RealMatrix>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// Starting iterate; `z` must be positive definite and is typically chosen
/// as `C - A^T y` so that every iterate stays dual feasible.
#[derive(Debug, Clone)]
pub struct InitialPoint {
    pub x: Vec<RealMatrix>,
    pub y: Vec<f64>,
    pub z: Vec<RealMatrix>,
}

struct Residuals {
    rp: Vec<f64>,
    rd: Vec<RealMatrix>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    relgap: f64,
}

fn residuals(p: &SdpProblem, x: &[RealMatrix], y: &[f64], z: &[RealMatrix], bnorm: f64, cnorm: f64) -> Residuals {
    let ax = p.apply(x);
    let rp: Vec<f64> = p.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let aty = p.adjoint(y);
    let rd: Vec<RealMatrix> = p
        .c
        .iter()
        .zip(z)
        .zip(&aty)
        .map(|((c, z), a)| c - z - a)
        .collect();
    let pobj = p.primal_objective(x);
    let dobj = p.dual_objective(y);
    let pinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + bnorm);
    let dinf = block_norm(&rd) / (1.0 + cnorm);
    let complementarity = block_dot(x, z).abs();
    let relgap = (pobj - dobj).abs().max(complementarity) / (1.0 + pobj.abs() + dobj.abs());
    Residuals { rp, rd, pobj, dobj, pinf, dinf, relgap }
}

fn default_start(p: &SdpProblem) -> InitialPoint {
    let n = p.total_dim() as f64;
    let mut xi: f64 = 10f64.max(n.sqrt());
    let mut eta: f64 = 10f64.max(n.sqrt());
    for (con, &bi) in p.constraints.iter().zip(&p.b) {
        let an = con.frobenius_sq().sqrt();
        xi = xi.max(n * (1.0 + bi.abs()) / (1.0 + an));
        eta = eta.max(an);
    }
    eta = eta.max(block_norm(&p.c));
    InitialPoint {
        x: p.block_dims.iter().map(|&d| RealMatrix::identity(d, d).scale(xi)).collect(),
        y: vec![0.0; p.num_constraints()],
        z: p.block_dims.iter().map(|&d| RealMatrix::identity(d, d).scale(eta)).collect(),
    }
}

fn symmetrize(m: &mut RealMatrix) {
    let t = m.transpose();
    *m += t;
    m.scale_mut(0.5);
}

/// Largest `alpha` with `X + alpha dX` positive semidefinite, per block.
fn max_step(x: &[RealMatrix], dx: &[RealMatrix]) -> Option<f64> {
    let mut alpha = f64::INFINITY;
    for (xb, dxb) in x.iter().zip(dx) {
        let chol = Cholesky::new(xb.clone())?;
        let l = chol.l();
        let left = l.solve_lower_triangular(dxb)?;
        let both = l.solve_lower_triangular(&left.transpose())?;
        let min = symmetric_eigenvalues(&both).ok()?[0];
        if min < 0.0 {
            alpha = alpha.min(-1.0 / min);
        }
    }
    Some(alpha)
}

/// Per-block list of `(constraint index, entries)` touching that block.
fn block_index(p: &SdpProblem) -> Vec<Vec<(usize, &[(usize, usize, f64)])>> {
    let mut idx: Vec<Vec<(usize, &[(usize, usize, f64)])>> = vec![Vec::new(); p.block_dims.len()];
    for (i, con) in p.constraints.iter().enumerate() {
        for (b, entries) in &con.parts {
            idx[*b].push((i, entries.as_slice()));
        }
    }
    idx
}

struct Direction {
    dx: Vec<RealMatrix>,
    dy: Vec<f64>,
    dz: Vec<RealMatrix>,
}

struct Workspace<'a> {
    p: &'a SdpProblem,
    index: Vec<Vec<(usize, &'a [(usize, usize, f64)])>>,
}

impl<'a> Workspace<'a> {
    fn schur(&self, g: &[RealMatrix], x: &[RealMatrix]) -> RealMatrix {
        let m = self.p.num_constraints();
        let mut schur = RealMatrix::zeros(m, m);
        for (b, cons) in self.index.iter().enumerate() {
            let n = self.p.block_dims[b];
            let (gb, xb) = (&g[b], &x[b]);
            for &(j, aj) in cons {
                // T = G A_j X
                let mut t = RealMatrix::zeros(n, n);
                for &(r, s, w) in aj {
                    for col in 0..n {
                        let xs = w * xb[(s, col)];
                        if xs == 0.0 {
                            continue;
                        }
                        for row in 0..n {
                            t[(row, col)] += gb[(row, r)] * xs;
                        }
                    }
                }
                for &(i, ai) in cons {
                    if i < j {
                        continue;
                    }
                    let v: f64 = ai.iter().map(|&(pp, q, v)| v * t[(q, pp)]).sum();
                    schur[(i, j)] += v;
                }
            }
        }
        for j in 0..m {
            for i in (j + 1)..m {
                schur[(j, i)] = schur[(i, j)];
            }
        }
        schur
    }

    /// Solves for the HKM direction given `rhs_extra = A(G * E)` terms folded
    /// into the complementarity target `K` (`dX = K - G dZ X`).
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        chol: &Cholesky<f64, nalgebra::Dyn>,
        g: &[RealMatrix],
        x: &[RealMatrix],
        rd: &[RealMatrix],
        target: &[RealMatrix],
        rp: &[f64],
    ) -> Direction {
        let p = self.p;
        // A(dX) = rp with dX = K - G (Rd - A^T dy) X
        // => M dy = rp - A(K) + A(G Rd X)
        let grdx: Vec<RealMatrix> = g.iter().zip(rd).zip(x).map(|((g, r), x)| g * r * x).collect();
        let ak = p.apply(target);
        let agrdx = p.apply(&grdx);
        let rhs: Vec<f64> = (0..p.num_constraints()).map(|i| rp[i] - ak[i] + agrdx[i]).collect();
        let dy_vec = chol.solve(&nalgebra::DVector::from_vec(rhs));
        let dy: Vec<f64> = dy_vec.iter().copied().collect();
        let aty = p.adjoint(&dy);
        let dz: Vec<RealMatrix> = rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
        let dx: Vec<RealMatrix> = target
            .iter()
            .zip(g)
            .zip(&dz)
            .zip(x)
            .map(|(((k, g), dz), x)| {
                let mut d = k - g * dz * x;
                symmetrize(&mut d);
                d
            })
            .collect();
        Direction { dx, dy, dz }
    }
}

fn invert_spd(m: &RealMatrix) -> Option<RealMatrix> {
    let chol = Cholesky::new(m.clone())?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

pub fn solve_sdp(p: &SdpProblem, cfg: &SolverConfig) -> Result<SdpSolution> {
    solve_sdp_from(p, cfg, None)
}

pub fn solve_sdp_from(p: &SdpProblem, cfg: &SolverConfig, start: Option<InitialPoint>) -> Result<SdpSolution> {
    p.validate()?;
    let InitialPoint { mut x, mut y, mut z } = start.unwrap_or_else(|| default_start(p));
    let ws = Workspace { p, index: block_index(p) };
    let n_total = p.total_dim() as f64;
    let bnorm = p.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cnorm = block_norm(&p.c);

    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    let mut best: Option<(f64, Vec<RealMatrix>, Vec<f64>, Vec<RealMatrix>)> = None;

    for iter in 0..=cfg.max_iters {
        let res = residuals(p, &x, &y, &z, bnorm, cnorm);
        let merit = res.relgap.max(res.pinf).max(res.dinf);
        if !merit.is_finite() {
            status = SolveStatus::InfeasibleNumerics;
            break;
        }
        if best.as_ref().map_or(true, |(m, ..)| merit < *m) {
            best = Some((merit, x.clone(), y.clone(), z.clone()));
        }
        iterations = iter;
        if res.relgap <= cfg.gap_target && res.pinf <= cfg.feasibility_target && res.dinf <= cfg.feasibility_target {
            status = SolveStatus::Optimal;
            break;
        }
        if iter == cfg.max_iters {
            break;
        }

        let mu = block_dot(&x, &z) / n_total;
        let Some(g) = z.iter().map(invert_spd).collect::<Option<Vec<_>>>() else {
            status = SolveStatus::InfeasibleNumerics;
            break;
        };
        let mut schur = ws.schur(&g, &x);
        let mut chol = Cholesky::new(schur.clone());
        if chol.is_none() {
            let bump = 1e-13 * schur.diagonal().amax().max(1.0);
            for i in 0..schur.nrows() {
                schur[(i, i)] += bump;
            }
            chol = Cholesky::new(schur);
        }
        let Some(chol) = chol else {
            status = SolveStatus::InfeasibleNumerics;
            break;
        };

        // predictor: target K = -X
        let neg_x: Vec<RealMatrix> = x.iter().map(|m| -m).collect();
        let pred = ws.direction(&chol, &g, &x, &res.rd, &neg_x, &res.rp);
        let (Some(ap), Some(ad)) = (max_step(&x, &pred.dx), max_step(&z, &pred.dz)) else {
            status = SolveStatus::InfeasibleNumerics;
            break;
        };
        let ap = (cfg.step_fraction * ap).min(1.0);
        let ad = (cfg.step_fraction * ad).min(1.0);
        let x_aff: Vec<RealMatrix> = x.iter().zip(&pred.dx).map(|(a, d)| a + d.scale(ap)).collect();
        let z_aff: Vec<RealMatrix> = z.iter().zip(&pred.dz).map(|(a, d)| a + d.scale(ad)).collect();
        let mu_aff = block_dot(&x_aff, &z_aff) / n_total;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector: K = sigma mu G - X - G dZa dXa
        let target: Vec<RealMatrix> = g
            .iter()
            .zip(&x)
            .zip(pred.dz.iter().zip(&pred.dx))
            .map(|((g, x), (dz, dx))| g.scale(sigma * mu) - x - g * dz * dx)
            .collect();
        let dir = ws.direction(&chol, &g, &x, &res.rd, &target, &res.rp);
        let (Some(ap), Some(ad)) = (max_step(&x, &dir.dx), max_step(&z, &dir.dz)) else {
            status = SolveStatus::InfeasibleNumerics;
            break;
        };
        let ap = (cfg.step_fraction * ap).min(1.0);
        let ad = (cfg.step_fraction * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            status = SolveStatus::InfeasibleNumerics;
            break;
        }
        for (xb, d) in x.iter_mut().zip(&dir.dx) {
            *xb += d.scale(ap);
        }
        for (zb, d) in z.iter_mut().zip(&dir.dz) {
            *zb += d.scale(ad);
        }
        for (yi, d) in y.iter_mut().zip(&dir.dy) {
            *yi += ad * d;
        }
    }

    if status != SolveStatus::Optimal {
        if let Some((_, bx, by, bz)) = best {
            x = bx;
            y = by;
            z = bz;
        }
    }
    let res = residuals(p, &x, &y, &z, bnorm, cnorm);
    let tol = cfg.tolerances;
    let status = if res.relgap <= tol.duality_gap && res.pinf <= tol.feasibility && res.dinf <= tol.feasibility {
        SolveStatus::Optimal
    } else if status == SolveStatus::Optimal {
        SolveStatus::MaxIters
    } else {
        status
    };
    Ok(SdpSolution {
        x,
        y,
        z,
        primal_objective: res.pobj,
        dual_objective: res.dobj,
        primal_infeasibility: res.pinf,
        dual_infeasibility: res.dinf,
        relative_gap: res.relgap,
        iterations,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::problem::Constraint;

    fn diag_entry(i: usize) -> Vec<(usize, usize, f64)> {
        vec![(i, i, 1.0)]
    }

    #[test]
    fn scalar_toy_with_cap() {
        // min x  s.t. x + s = 1, x, s >= 0
        let p = SdpProblem {
            block_dims: vec![1, 1],
            c: vec![RealMatrix::from_element(1, 1, 1.0), RealMatrix::zeros(1, 1)],
            constraints: vec![Constraint { parts: vec![(0, diag_entry(0)), (1, diag_entry(0))] }],
            b: vec![1.0],
        };
        let sol = solve_sdp(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.primal_objective.abs() < 1e-7);
        assert!(sol.dual_objective.abs() < 1e-7);
    }

    #[test]
    fn min_eigenvalue_toy() {
        // min Tr(C X) s.t. Tr X = 1, C = diag(1, 2)
        let mut c = RealMatrix::zeros(2, 2);
        c[(0, 0)] = 1.0;
        c[(1, 1)] = 2.0;
        let p = SdpProblem {
            block_dims: vec![2],
            c: vec![c],
            constraints: vec![Constraint { parts: vec![(0, vec![(0, 0, 1.0), (1, 1, 1.0)])] }],
            b: vec![1.0],
        };
        let sol = solve_sdp(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 1.0).abs() < 1e-7);
        assert!((sol.dual_objective - 1.0).abs() < 1e-7);
        assert!(sol.relative_gap <= 1e-6);
        assert!(sol.primal_infeasibility <= 1e-8 && sol.dual_infeasibility <= 1e-8);
    }

    #[test]
    fn malformed_problem_is_rejected() {
        let p = SdpProblem {
            block_dims: vec![2],
            c: vec![RealMatrix::zeros(2, 2)],
            constraints: vec![Constraint { parts: vec![(3, diag_entry(0))] }],
            b: vec![1.0],
        };
        assert!(solve_sdp(&p, &SolverConfig::default()).is_err());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut c = RealMatrix::zeros(2, 2);
        c[(0, 0)] = 1.0;
        c[(1, 1)] = 2.0;
        let p = SdpProblem {
            block_dims: vec![2],
            c: vec![c],
            constraints: vec![Constraint { parts: vec![(0, vec![(0, 0, 1.0), (1, 1, 1.0)])] }],
            b: vec![1.0],
        };
        let cfg = SolverConfig { max_iters: 2, ..SolverConfig::default() };
        let sol = solve_sdp(&p, &cfg).unwrap();
        assert_eq!(sol.status, SolveStatus::MaxIters);
        assert!(sol.relative_gap > 1e-6 || sol.primal_infeasibility > 1e-8);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        /// `min <C, X>` over unit-trace block-diagonal `X` is the smallest
        /// eigenvalue across the blocks of `C`.
        #[test]
        fn random_block_problem_hits_min_eigenvalue(seed in proptest::prelude::any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dims = [3usize, 5];
            let mut c = Vec::new();
            let mut parts = Vec::new();
            for (b, &n) in dims.iter().enumerate() {
                let g = RealMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                c.push(&g + g.transpose());
                parts.push((b, (0..n).map(|i| (i, i, 1.0)).collect()));
            }
            let oracle = c
                .iter()
                .map(|m| symmetric_eigenvalues(m).unwrap()[0])
                .fold(f64::INFINITY, f64::min);
            let p = SdpProblem {
                block_dims: dims.to_vec(),
                c,
                constraints: vec![Constraint { parts }],
                b: vec![1.0],
            };
            let sol = solve_sdp(&p, &SolverConfig::default()).unwrap();
            proptest::prop_assert_eq!(sol.status, SolveStatus::Optimal);
            proptest::prop_assert!((sol.primal_objective - oracle).abs() < 1e-6);
            proptest::prop_assert!((sol.dual_objective - oracle).abs() < 1e-6);
        }
    }
}
