use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// Non-zero entries `(row, col, value)` of a symmetric matrix restricted to
/// one block. Both triangles are listed.
pub type BlockEntries = Vec<(usize, usize, f64)>;

/// One affine constraint `sum_b <A_b, X_b> = b_i`, stored per block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Constraint {
    pub parts: Vec<(usize, BlockEntries)>,
}

impl Constraint {
    /// `<A, Y>` for block-diagonal `Y`.
    pub fn dot(&self, y: &[RealMatrix]) -> f64 {
        self.parts
            .iter()
            .map(|(b, entries)| entries.iter().map(|&(r, c, v)| v * y[*b][(r, c)]).sum::<f64>())
            .sum()
    }

    pub fn add_scaled_to(&self, scale: f64, out: &mut [RealMatrix]) {
        for (b, entries) in &self.parts {
            for &(r, c, v) in entries {
                out[*b][(r, c)] += scale * v;
            }
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.parts
            .iter()
            .flat_map(|(_, e)| e.iter())
            .map(|&(_, _, v)| v * v)
            .sum()
    }
}

/// Block-diagonal SDP in standard form.
///
/// Primal: `min <C, X>` subject to `<A_i, X> = b_i` and `X >= 0`.
/// Dual: `max b^T y` subject to `Z = C - sum_i y_i A_i >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub c: Vec<RealMatrix>,
    pub constraints: Vec<Constraint>,
    pub b: Vec<f64>,
}

impl SdpProblem {
    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn total_dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_dims.is_empty() {
            return Err(Error::InvalidParameter("SDP has no blocks".into()));
        }
        if self.c.len() != self.block_dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.block_dims.len(),
                got: self.c.len(),
            });
        }
        if self.b.len() != self.constraints.len() {
            return Err(Error::DimensionMismatch {
                expected: self.constraints.len(),
                got: self.b.len(),
            });
        }
        for (c, &n) in self.c.iter().zip(&self.block_dims) {
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.nrows() });
            }
            if (c - c.transpose()).amax() > 1e-12 * c.amax().max(1.0) {
                return Err(Error::InvalidParameter("objective block is not symmetric".into()));
            }
        }
        if !self.b.iter().all(|x| x.is_finite()) || !self.c.iter().all(|m| m.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite);
        }
        for (i, con) in self.constraints.iter().enumerate() {
            for (blk, entries) in &con.parts {
                let n = *self.block_dims.get(*blk).ok_or_else(|| {
                    Error::InvalidParameter(format!("constraint {i} references block {blk}"))
                })?;
                for &(r, c, v) in entries {
                    if r >= n || c >= n || !v.is_finite() {
                        return Err(Error::InvalidParameter(format!("constraint {i} has a bad entry")));
                    }
                }
            }
        }
        Ok(())
    }

    /// `A(X)`.
    pub fn apply(&self, x: &[RealMatrix]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.dot(x)).collect()
    }

    /// `sum_i y_i A_i`.
    pub fn adjoint(&self, y: &[f64]) -> Vec<RealMatrix> {
        let mut out = self.zero_blocks();
        for (con, &yi) in self.constraints.iter().zip(y) {
            if yi != 0.0 {
                con.add_scaled_to(yi, &mut out);
            }
        }
        out
    }

    /// `C - sum_i y_i A_i`.
    pub fn dual_slack(&self, y: &[f64]) -> Vec<RealMatrix> {
        let aty = self.adjoint(y);
        self.c.iter().zip(aty).map(|(c, a)| c - a).collect()
    }

    pub fn zero_blocks(&self) -> Vec<RealMatrix> {
        self.block_dims.iter().map(|&n| RealMatrix::zeros(n, n)).collect()
    }

    pub fn primal_objective(&self, x: &[RealMatrix]) -> f64 {
        block_dot(&self.c, x)
    }

    pub fn dual_objective(&self, y: &[f64]) -> f64 {
        self.b.iter().zip(y).map(|(b, y)| b * y).sum()
    }
}

pub fn block_dot(a: &[RealMatrix], b: &[RealMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

pub fn block_norm(a: &[RealMatrix]) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

/// Non-zero entries of a dense symmetric matrix.
pub fn sparse_entries(m: &RealMatrix) -> BlockEntries {
    let mut out = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v != 0.0 {
                out.push((r, c, v));
            }
        }
    }
    out
}
