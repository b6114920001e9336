//! SMO for the soft-margin dual
//! `max sum(a) - 1/2 a^T Q a`, `Q_ij = y_i y_j K_ij`, `0 <= a_i <= C_i`,
//! `y^T a = 0`, with second-order working-set selection and per-sample
//! box bounds.

use serde::{Deserialize, Serialize};

use super::kernel::KernelRows;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    /// Stopping threshold on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Gradient of `1/2 a^T Q a - sum(a)`, i.e. `y_i f(x_i) - 1 - y_i b`.
    pub gradient: Vec<f64>,
    /// `sum(a) - 1/2 a^T Q a` at the returned iterate.
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn solve_smo<R: KernelRows>(
    rows: &mut R,
    y: &[f64],
    cost: &[f64],
    params: &SmoParams,
    warm: Option<&[f64]>,
) -> Result<SmoSolution> {
    let n = rows.len();
    if y.len() != n || cost.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len().min(cost.len()) });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
    }
    if cost.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidParameter("box bounds must be positive".into()));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::SingleClass);
    }

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    if let Some(a0) = warm {
        if a0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a0.len() });
        }
        let balance: f64 = a0.iter().zip(y).map(|(a, y)| a * y).sum();
        let scale = a0.iter().zip(cost).map(|(a, c)| a.abs().max(*c)).fold(1.0, f64::max);
        if a0.iter().zip(cost).any(|(&a, &c)| !(0.0..=c).contains(&a)) || balance.abs() > 1e-9 * scale {
            return Err(Error::InvalidParameter("warm start is not dual feasible".into()));
        }
        alpha.copy_from_slice(a0);
        for i in 0..n {
            if alpha[i] != 0.0 {
                let ki = rows.row(i);
                let s = alpha[i] * y[i];
                for (k, g) in grad.iter_mut().enumerate() {
                    *g += s * y[k] * ki[k];
                }
            }
        }
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        let Some((i, j)) = select_pair(rows, y, cost, &alpha, &grad, params.tol) else {
            converged = true;
            break;
        };
        iterations += 1;
        let ki = rows.row(i);
        let kj = rows.row(j);
        let (ci, cj) = (cost[i], cost[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = rows.diag(i) + rows.diag(j) - 2.0 * ki[j];
        if quad <= 0.0 {
            quad = TAU;
        }
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = ((ai - old_i) * y[i], (aj - old_j) * y[j]);
        for k in 0..n {
            grad[k] += y[k] * (ki[k] * di + kj[k] * dj);
        }
    }

    let bias = -rho(y, cost, &alpha, &grad);
    let dual_objective = -alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() / 2.0;
    Ok(SmoSolution { alpha, bias, gradient: grad, dual_objective, iterations, converged })
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    if y > 0.0 {
        a < c
    } else {
        a > 0.0
    }
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    if y > 0.0 {
        a > 0.0
    } else {
        a < c
    }
}

fn select_pair<R: KernelRows>(
    rows: &mut R,
    y: &[f64],
    cost: &[f64],
    alpha: &[f64],
    grad: &[f64],
    tol: f64,
) -> Option<(usize, usize)> {
    let n = y.len();
    let mut gmax = f64::NEG_INFINITY;
    let mut best_i = None;
    for t in 0..n {
        if in_up(y[t], alpha[t], cost[t]) {
            let v = -y[t] * grad[t];
            if v >= gmax {
                gmax = v;
                best_i = Some(t);
            }
        }
    }
    let i = best_i?;
    let ki = rows.row(i);
    let kii = rows.diag(i);
    let mut gmax2 = f64::NEG_INFINITY;
    let mut best_j = None;
    let mut obj_min = f64::INFINITY;
    for t in 0..n {
        if !in_low(y[t], alpha[t], cost[t]) {
            continue;
        }
        let v = y[t] * grad[t];
        gmax2 = gmax2.max(v);
        let grad_diff = gmax + v;
        if grad_diff > 0.0 {
            let mut quad = kii + rows.diag(t) - 2.0 * ki[t];
            if quad <= 0.0 {
                quad = TAU;
            }
            let obj = -grad_diff * grad_diff / quad;
            if obj <= obj_min {
                obj_min = obj;
                best_j = Some(t);
            }
        }
    }
    if gmax + gmax2 < tol {
        return None;
    }
    best_j.map(|j| (i, j))
}

fn rho(y: &[f64], cost: &[f64], alpha: &[f64], grad: &[f64]) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut nr_free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= cost[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            nr_free += 1;
            sum_free += yg;
        }
    }
    if nr_free > 0 {
        sum_free / nr_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Largest violation of the soft-margin KKT conditions, with margins
/// `y_i f(x_i)` supplied by the caller.
pub fn kkt_max_violation(y: &[f64], cost: &[f64], alpha: &[f64], decision: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for t in 0..y.len() {
        let m = y[t] * decision[t];
        let v = if alpha[t] <= 0.0 {
            1.0 - m
        } else if alpha[t] >= cost[t] {
            m - 1.0
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RealMatrix;
    use crate::svm::kernel::{DenseGram, FeatureSource, Kernel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> SmoParams {
        SmoParams { tol: 1e-3, max_iter: 100_000 }
    }

    fn gram(points: &[Vec<f64>], kernel: Kernel) -> DenseGram {
        DenseGram::from_source(&FeatureSource { points: points.to_vec(), kernel })
    }

    fn decisions(g: &DenseGram, y: &[f64], s: &SmoSolution) -> Vec<f64> {
        (0..y.len())
            .map(|i| (0..y.len()).map(|j| s.alpha[j] * y[j] * g.get(i, j)).sum::<f64>() + s.bias)
            .collect()
    }

    /// Exact optimum of the dual by enumerating which coordinates sit at 0,
    /// at C, or strictly between, and solving the equality-constrained
    /// stationarity system for each pattern.
    fn active_set_optimum(q: &RealMatrix, y: &[f64], c: f64) -> f64 {
        let n = y.len();
        let mut best = f64::NEG_INFINITY;
        for code in 0..3usize.pow(n as u32) {
            let mut state = vec![0u8; n];
            let mut k = code;
            for s in state.iter_mut() {
                *s = (k % 3) as u8;
                k /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
            let mut a = vec![0.0; n];
            for i in 0..n {
                if state[i] == 1 {
                    a[i] = c;
                }
            }
            let fixed_balance: f64 = (0..n).filter(|&i| state[i] == 1).map(|i| y[i] * c).sum();
            if free.is_empty() {
                if fixed_balance.abs() > 1e-9 {
                    continue;
                }
            } else {
                let m = free.len();
                let mut sys = RealMatrix::zeros(m + 1, m + 1);
                let mut rhs = nalgebra::DVector::zeros(m + 1);
                for (r, &i) in free.iter().enumerate() {
                    for (s, &j) in free.iter().enumerate() {
                        sys[(r, s)] = q[(i, j)];
                    }
                    sys[(r, m)] = y[i];
                    sys[(m, r)] = y[i];
                    rhs[r] = 1.0 - (0..n).filter(|&j| state[j] == 1).map(|j| q[(i, j)] * c).sum::<f64>();
                }
                rhs[m] = -fixed_balance;
                let Some(sol) = sys.lu().solve(&rhs) else { continue };
                let mut ok = true;
                for (r, &i) in free.iter().enumerate() {
                    if sol[r] < -1e-9 || sol[r] > c + 1e-9 {
                        ok = false;
                    }
                    a[i] = sol[r].clamp(0.0, c);
                }
                if !ok {
                    continue;
                }
            }
            let qa = q * nalgebra::DVector::from_column_slice(&a);
            let w = a.iter().sum::<f64>() - 0.5 * a.iter().zip(qa.iter()).map(|(x, y)| x * y).sum::<f64>();
            best = best.max(w);
        }
        best
    }

    #[test]
    fn symmetric_pair() {
        let pts = vec![vec![1.0], vec![-1.0]];
        let y = [1.0, -1.0];
        let mut g = gram(&pts, Kernel::Linear);
        let s = solve_smo(&mut g, &y, &[10.0, 10.0], &params(), None).unwrap();
        assert!(s.converged);
        assert!(s.alpha.iter().all(|&a| a > 0.0));
        assert!(s.bias.abs() < 1e-12);
        let f = decisions(&g, &y, &s);
        assert!(f[0] > 0.0 && f[1] < 0.0);
        assert!((f[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let pts = vec![vec![1.0], vec![-1.0]];
        let mut g = gram(&pts, Kernel::Linear);
        assert!(matches!(solve_smo(&mut g, &[1.0, 1.0], &[1.0, 1.0], &params(), None), Err(Error::SingleClass)));
        assert!(solve_smo(&mut g, &[1.0, 0.5], &[1.0, 1.0], &params(), None).is_err());
        assert!(solve_smo(&mut g, &[1.0, -1.0], &[1.0, 0.0], &params(), None).is_err());
        assert!(solve_smo(&mut g, &[1.0, -1.0], &[1.0, 1.0], &params(), Some(&[0.5, 0.0])).is_err());
    }

    #[test]
    fn matches_active_set_optimum_and_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..30 {
            let n = rng.gen_range(2..=6);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let mut y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let c = [0.5, 2.0, 20.0][case % 3];
            let kernel = Kernel::rbf(rng.gen_range(0.3..3.0)).unwrap();
            let mut g = gram(&pts, kernel);
            let cost = vec![c; n];
            let tight = SmoParams { tol: 1e-8, max_iter: 100_000 };
            let s = solve_smo(&mut g, &y, &cost, &tight, None).unwrap();
            assert!(s.converged);
            let q = RealMatrix::from_fn(n, n, |i, j| y[i] * y[j] * g.get(i, j));
            let oracle = active_set_optimum(&q, &y, c);
            assert!((s.dual_objective - oracle).abs() < 1e-6, "case {case}: {} vs {oracle}", s.dual_objective);
            let balance: f64 = s.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
            assert!(balance.abs() < 1e-8);
            assert!(kkt_max_violation(&y, &cost, &s.alpha, &decisions(&g, &y, &s)) <= 1e-8 * 10.0);
        }
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = pts.iter().map(|p| if p[0] + 0.3 * p[1] > 0.0 { 1.0 } else { -1.0 }).collect();
        let cost = vec![5.0; 40];
        let mut g = gram(&pts, Kernel::rbf(1.0).unwrap());
        let cold = solve_smo(&mut g, &y, &cost, &params(), None).unwrap();
        let warm = solve_smo(&mut g, &y, &cost, &params(), Some(&cold.alpha)).unwrap();
        assert!(warm.iterations <= 1);
        assert!((warm.dual_objective - cold.dual_objective).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mut g = gram(&pts, Kernel::rbf(5.0).unwrap());
        let s = solve_smo(&mut g, &y, &vec![100.0; 30], &SmoParams { tol: 1e-3, max_iter: 3 }, None).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 3);
    }
}
