//! Dense complex and real linear algebra kernels.
//!
//! Everything here works on small dense matrices (at most 64x64). Hermitian
//! inputs are checked against [`Tolerances::hermitian`] and replaced by their
//! Hermitian part `(H + H^dagger) / 2` before any spectral computation.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealMatrix = DMatrix<f64>;

/// Largest matrix side accepted by [`kron`].
pub const MAX_DIM: usize = 64;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Eigendecomposition `H = V diag(lambda) V^dagger` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= lambda;
            }
        }
        &scaled * self.eigenvectors.adjoint()
    }
}

fn check_square_finite<T: nalgebra::Scalar>(m: &DMatrix<T>, finite: impl Fn(&T) -> bool) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if !m.iter().all(finite) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Largest entry of `|H - H^dagger|`.
pub fn hermiticity_residual(h: &ComplexMatrix) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Validates `h` and returns its Hermitian part.
pub fn hermitian_part(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_square_finite(h, |z| z.re.is_finite() && z.im.is_finite())?;
    let scale = h.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
    let residual = hermiticity_residual(h);
    if residual > Tolerances::DEFAULT.hermitian * scale {
        return Err(Error::NotHermitian { residual });
    }
    Ok((h + h.adjoint()).scale(0.5))
}

pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianEig> {
    let sym = hermitian_part(h)?;
    let n = sym.nrows();
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Ascending eigenvalues of a Hermitian matrix, without eigenvectors.
pub fn eigenvalues(h: &ComplexMatrix) -> Result<Vec<f64>> {
    let sym = hermitian_part(h)?;
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(m: &RealMatrix) -> Result<Vec<f64>> {
    check_square_finite(m, |x| x.is_finite())?;
    let sym = (m + m.transpose()).scale(0.5);
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(h: &ComplexMatrix) -> Result<f64> {
    Ok(eigenvalues(h)?.iter().map(|x| x.abs()).sum())
}

pub fn is_psd(h: &ComplexMatrix, tol: f64) -> Result<bool> {
    let vals = eigenvalues(h)?;
    Ok(vals.first().map_or(true, |&min| min >= -tol))
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.nrows() * b.nrows();
    let cols = a.ncols() * b.ncols();
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(Error::DimensionCap(rows.max(cols)));
    }
    if !a.iter().chain(b.iter()).all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(a.kronecker(b))
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
pub fn realify(h: &ComplexMatrix) -> Result<RealMatrix> {
    let sym = hermitian_part(h)?;
    Ok(realify_unchecked(&sym))
}

pub(crate) fn realify_unchecked(h: &ComplexMatrix) -> RealMatrix {
    let n = h.nrows();
    let mut out = RealMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`realify`] on the structured subspace; for an arbitrary
/// symmetric input it returns the Hermitian matrix whose embedding is the
/// nearest structured matrix.
pub fn complexify(m: &RealMatrix) -> ComplexMatrix {
    let n = m.nrows() / 2;
    ComplexMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + n, j + n)]);
        let im = 0.5 * (m[(i + n, j)] - m[(i, j + n)]);
        c64(re, im)
    })
}

/// Real part of `Tr(A B)`.
pub fn trace_product_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = a[(i, k)] * b[(k, i)];
            acc += x.re;
        }
    }
    acc
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-1.0, 0.0)])
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(n, n, |_, _| {
            c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        (&g + g.adjoint()).scale(0.5)
    }

    pub fn random_complex<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pauli_z_spectrum() {
        let eig = hermitian_eig(&pauli_z()).unwrap();
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_spectrum_and_unitary_vectors() {
        let eig = hermitian_eig(&identity(8)).unwrap();
        assert!(eig.eigenvalues.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        let gram = eig.eigenvectors.adjoint() * &eig.eigenvectors;
        assert!((gram - identity(8)).norm() < 1e-10);
    }

    #[test]
    fn random_hermitian_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let h = random_hermitian(8, &mut rng);
            let eig = hermitian_eig(&h).unwrap();
            assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let residual = (eig.reconstruct() - &h).norm();
            assert!(residual <= 1e-10 * h.norm(), "residual {residual}");
            let unitarity = (eig.eigenvectors.adjoint() * &eig.eigenvectors - identity(8)).norm();
            assert!(unitarity <= 1e-10);
        }
    }

    /// Block-diagonal Hermitian built from 2x2 blocks; each block's spectrum
    /// follows from the characteristic polynomial.
    #[test]
    fn block_spectrum_matches_characteristic_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut h = ComplexMatrix::zeros(8, 8);
            let mut expected = Vec::new();
            for b in 0..4 {
                let blk = random_hermitian(2, &mut rng);
                let (a, d, off) = (blk[(0, 0)].re, blk[(1, 1)].re, blk[(0, 1)]);
                let mean = 0.5 * (a + d);
                let radius = (0.25 * (a - d) * (a - d) + off.norm_sqr()).sqrt();
                expected.push(mean - radius);
                expected.push(mean + radius);
                for i in 0..2 {
                    for j in 0..2 {
                        h[(2 * b + i, 2 * b + j)] = blk[(i, j)];
                    }
                }
            }
            expected.sort_by(f64::total_cmp);
            let got = hermitian_eig(&h).unwrap().eigenvalues;
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() < 1e-12, "{g} vs {e}");
            }
        }
    }

    #[test]
    fn eig_rejects_bad_input() {
        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(hermitian_eig(&rect), Err(Error::NotSquare { .. })));
        let mut nan = identity(2);
        nan[(0, 1)] = c64(f64::NAN, 0.0);
        assert!(matches!(hermitian_eig(&nan), Err(Error::NonFinite)));
        let mut skew = identity(2);
        skew[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(hermitian_eig(&skew), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&pauli_z()).unwrap() - 2.0).abs() < 1e-14);
        let rho = identity(8).scale(1.0 / 8.0);
        assert!((trace_norm(&rho).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kron_examples() {
        let i2 = identity(2);
        assert_eq!(kron(&i2, &i2).unwrap(), identity(4));

        let xx = kron(&pauli_x(), &pauli_x()).unwrap();
        let mut ket00 = ComplexMatrix::zeros(4, 1);
        ket00[(0, 0)] = c64(1.0, 0.0);
        let out = xx * ket00;
        assert!((out[(3, 0)] - c64(1.0, 0.0)).norm() < 1e-15);

        let xyz = kron(&kron(&pauli_x(), &pauli_y()).unwrap(), &pauli_z()).unwrap();
        let tr: Complex64 = xyz.trace();
        assert!(tr.norm() < 1e-15);
        assert!(hermiticity_residual(&xyz) < 1e-15);
        assert!((&xyz * &xyz - identity(8)).norm() < 1e-14);
    }

    #[test]
    fn kron_dimension_cap() {
        let big = identity(16);
        let small = identity(8);
        assert!(matches!(kron(&big, &small), Err(Error::DimensionCap(128))));
    }

    #[test]
    fn is_psd_examples() {
        assert!(is_psd(&identity(8), 0.0).unwrap());
        assert!(!is_psd(&pauli_z(), 1e-9).unwrap());
    }

    #[test]
    fn realify_pauli_y() {
        let r = realify(&pauli_y()).unwrap();
        assert_eq!(r.nrows(), 4);
        assert!((&r - r.transpose()).norm() < 1e-15);
        let vals = symmetric_eigenvalues(&r).unwrap();
        let expected = [-1.0, -1.0, 1.0, 1.0];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-14);
        }
    }

    #[test]
    fn realify_real_input_is_block_copy() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(2.0, 0.0), c64(2.0, 0.0), c64(3.0, 0.0)]);
        let r = realify(&m).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(r[(i, j)], m[(i, j)].re);
                assert_eq!(r[(i + 2, j + 2)], m[(i, j)].re);
                assert_eq!(r[(i, j + 2)], 0.0);
                assert_eq!(r[(i + 2, j)], 0.0);
            }
        }
    }

    #[test]
    fn realify_doubles_spectrum_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let h = random_hermitian(8, &mut rng);
            let complex_vals = eigenvalues(&h).unwrap();
            let real_vals = symmetric_eigenvalues(&realify(&h).unwrap()).unwrap();
            for (k, v) in complex_vals.iter().enumerate() {
                assert!((real_vals[2 * k] - v).abs() < 1e-10);
                assert!((real_vals[2 * k + 1] - v).abs() < 1e-10);
            }
            assert!((complexify(&realify(&h).unwrap()) - &h).norm() < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trace_norm_bounds_trace(seed in any::<u64>(), shift in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(6, &mut rng) + identity(6).scale(shift);
            let tn = trace_norm(&h).unwrap();
            let tr = h.trace().re;
            prop_assert!(tn + 1e-12 >= tr.abs());
            let psd = is_psd(&h, 1e-10).unwrap();
            prop_assert_eq!((tn - tr).abs() <= 1e-9 * tn.max(1.0), psd);
        }

        #[test]
        fn realify_preserves_psd(seed in any::<u64>(), shift in 0.0f64..8.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(4, &mut rng) + identity(4).scale(shift);
            let r = realify(&h).unwrap();
            let min_real = symmetric_eigenvalues(&r).unwrap()[0];
            prop_assert_eq!(is_psd(&h, 1e-10).unwrap(), min_real >= -1e-10);
        }

        #[test]
        fn kron_trace_is_multiplicative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_complex(3, 3, &mut rng);
            let b = random_complex(4, 4, &mut rng);
            let k = kron(&a, &b).unwrap();
            prop_assert!((k.trace() - a.trace() * b.trace()).norm() < 1e-10);
        }
    }
}
