//! Pauli (Bloch) expansion of three-qubit states and the 64-dimensional
//! feature vectors derived from it.
//!
//! The canonical ordering of the 64 Pauli words is
//! `[III, r(3), s(3), p(3), t(9), q(9), o(9), m(27)]` where
//! `r_i = <s_i I I>`, `s_j = <I s_j I>`, `p_k = <I I s_k>`,
//! `t_ij = <s_i s_j I>`, `q_ik = <s_i I s_k>`, `o_jk = <I s_j s_k>` and
//! `m_ijk = <s_i s_j s_k>`; two-index blocks are row-major and the
//! three-index block is lexicographic.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::{DensityMatrix, DIM};
use crate::error::{Error, Result};
use crate::numerics::{c64, ComplexMatrix};

pub const FEATURE_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLayout {
    /// Expectation values of the 64 ordered Pauli words.
    #[default]
    Pauli,
    /// 8 diagonal entries followed by 28 upper-triangle (re, im) pairs.
    HermitianTriangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub coeffs: Vec<f64>,
    pub layout: FeatureLayout,
}

/// A Pauli word as a monomial matrix: column `j` has its single non-zero in
/// row `rows[j]` with value `phases[j]`.
#[derive(Debug, Clone)]
pub struct PauliWord {
    pub ops: [u8; 3],
    rows: [usize; DIM],
    phases: [Complex64; DIM],
}

impl PauliWord {
    fn new(ops: [u8; 3]) -> Self {
        let mut rows = [0usize; DIM];
        let mut phases = [c64(1.0, 0.0); DIM];
        for col in 0..DIM {
            let mut row = 0usize;
            let mut phase = c64(1.0, 0.0);
            for (q, &op) in ops.iter().enumerate() {
                let bit = (col >> (2 - q)) & 1;
                let (r, v) = single_qubit(op, bit);
                row |= r << (2 - q);
                phase *= v;
            }
            rows[col] = row;
            phases[col] = phase;
        }
        Self { ops, rows, phases }
    }

    pub fn matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(DIM, DIM);
        for col in 0..DIM {
            m[(self.rows[col], col)] = self.phases[col];
        }
        m
    }

    /// `Tr(rho P)`, real for Hermitian `rho`.
    pub fn expectation(&self, rho: &ComplexMatrix) -> f64 {
        let mut acc = c64(0.0, 0.0);
        for col in 0..DIM {
            acc += rho[(col, self.rows[col])] * self.phases[col];
        }
        acc.re
    }

    fn accumulate(&self, weight: f64, out: &mut ComplexMatrix) {
        for col in 0..DIM {
            out[(self.rows[col], col)] += self.phases[col] * weight;
        }
    }
}

/// Image of basis state `bit` under a single-qubit Pauli (0 = I, 1 = X,
/// 2 = Y, 3 = Z): returns the output bit and amplitude.
fn single_qubit(op: u8, bit: usize) -> (usize, Complex64) {
    match (op, bit) {
        (0, b) => (b, c64(1.0, 0.0)),
        (1, b) => (1 - b, c64(1.0, 0.0)),
        (2, 0) => (1, c64(0.0, 1.0)),
        (2, _) => (0, c64(0.0, -1.0)),
        (3, 0) => (0, c64(1.0, 0.0)),
        (3, _) => (1, c64(-1.0, 0.0)),
        _ => unreachable!("Pauli index out of range"),
    }
}

/// The 64 Pauli words in canonical feature order.
pub fn pauli_words() -> &'static [PauliWord] {
    static WORDS: OnceLock<Vec<PauliWord>> = OnceLock::new();
    WORDS.get_or_init(|| {
        let mut ops: Vec<[u8; 3]> = vec![[0, 0, 0]];
        for i in 1..=3 {
            ops.push([i, 0, 0]);
        }
        for j in 1..=3 {
            ops.push([0, j, 0]);
        }
        for k in 1..=3 {
            ops.push([0, 0, k]);
        }
        for i in 1..=3 {
            for j in 1..=3 {
                ops.push([i, j, 0]);
            }
        }
        for i in 1..=3 {
            for k in 1..=3 {
                ops.push([i, 0, k]);
            }
        }
        for j in 1..=3 {
            for k in 1..=3 {
                ops.push([0, j, k]);
            }
        }
        for i in 1..=3 {
            for j in 1..=3 {
                for k in 1..=3 {
                    ops.push([i, j, k]);
                }
            }
        }
        debug_assert_eq!(ops.len(), FEATURE_DIM);
        ops.into_iter().map(PauliWord::new).collect()
    })
}

/// Index of the Pauli word with the given operators (0 = I, 1..3 = X, Y, Z).
pub fn word_index(ops: [u8; 3]) -> usize {
    pauli_words()
        .iter()
        .position(|w| w.ops == ops)
        .expect("every Pauli word appears once")
}

pub fn bloch_features(rho: &DensityMatrix) -> BlochVector {
    let coeffs = pauli_words().iter().map(|w| w.expectation(rho.matrix())).collect();
    BlochVector {
        coeffs,
        layout: FeatureLayout::Pauli,
    }
}

fn triangle_features(rho: &DensityMatrix) -> BlochVector {
    let m = rho.matrix();
    let mut coeffs = Vec::with_capacity(FEATURE_DIM);
    for i in 0..DIM {
        coeffs.push(m[(i, i)].re);
    }
    for i in 0..DIM {
        for j in (i + 1)..DIM {
            coeffs.push(m[(i, j)].re);
            coeffs.push(m[(i, j)].im);
        }
    }
    BlochVector {
        coeffs,
        layout: FeatureLayout::HermitianTriangle,
    }
}

/// Feature vector of `rho` in the requested layout.
pub fn features(rho: &DensityMatrix, layout: FeatureLayout) -> BlochVector {
    match layout {
        FeatureLayout::Pauli => bloch_features(rho),
        FeatureLayout::HermitianTriangle => triangle_features(rho),
    }
}

/// Rebuilds the matrix described by a feature vector without checking
/// positivity.
pub fn matrix_from_features(v: &BlochVector) -> Result<ComplexMatrix> {
    if v.coeffs.len() != FEATURE_DIM {
        return Err(Error::DimensionMismatch {
            expected: FEATURE_DIM,
            got: v.coeffs.len(),
        });
    }
    if !v.coeffs.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut m = ComplexMatrix::zeros(DIM, DIM);
    match v.layout {
        FeatureLayout::Pauli => {
            for (w, &c) in pauli_words().iter().zip(&v.coeffs) {
                w.accumulate(c / DIM as f64, &mut m);
            }
        }
        FeatureLayout::HermitianTriangle => {
            for i in 0..DIM {
                m[(i, i)] = c64(v.coeffs[i], 0.0);
            }
            let mut k = DIM;
            for i in 0..DIM {
                for j in (i + 1)..DIM {
                    let z = c64(v.coeffs[k], v.coeffs[k + 1]);
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                    k += 2;
                }
            }
        }
    }
    Ok(m)
}

/// Inverse of [`bloch_features`]; fails when the coefficients do not
/// describe a positive semidefinite unit-trace operator.
pub fn from_bloch(v: &BlochVector) -> Result<DensityMatrix> {
    let m = matrix_from_features(v)?;
    DensityMatrix::new(m)
}
