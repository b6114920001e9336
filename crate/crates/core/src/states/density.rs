use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, c64, ComplexMatrix};
use crate::tolerance::Tolerances;

/// Hilbert space dimension of three qubits.
pub const DIM: usize = 8;

/// A validated three-qubit density matrix. Basis index is `4a + 2b + c` for
/// the computational state `|abc>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity at the default density
    /// tolerance; stores the Hermitian part.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(mat, Tolerances::DEFAULT.density)
    }

    pub fn with_tolerance(mat: ComplexMatrix, tol: f64) -> Result<Self> {
        if mat.nrows() != DIM || mat.ncols() != DIM {
            return Err(Error::InvalidDensity(format!(
                "expected 8x8, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if !mat.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let residual = numerics::hermiticity_residual(&mat);
        if residual > tol {
            return Err(Error::InvalidDensity(format!("not Hermitian (residual {residual:.3e})")));
        }
        let sym = (&mat + mat.adjoint()).scale(0.5);
        let tr = sym.trace().re;
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min = numerics::eigenvalues(&sym)?[0];
        if min < -tol {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { mat: sym })
    }

    /// Projector onto a normalized pure state.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        check_normalized(psi)?;
        let mat = ComplexMatrix::from_fn(DIM, DIM, |i, j| psi[i] * psi[j].conj());
        Ok(Self { mat: (&mat + mat.adjoint()).scale(0.5) })
    }

    /// Wraps a matrix known to be a valid state, skipping the spectral check.
    pub(crate) fn from_trusted(mat: ComplexMatrix) -> Self {
        debug_assert_eq!(mat.nrows(), DIM);
        let sym = (&mat + mat.adjoint()).scale(0.5);
        Self { mat: sym }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn maximally_mixed() -> Self {
        Self::from_trusted(ComplexMatrix::identity(DIM, DIM).scale(1.0 / DIM as f64))
    }

    /// Convex combination `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &DensityMatrix, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!("mixing weight {weight} outside [0, 1]")));
        }
        Ok(Self::from_trusted(self.mat.scale(weight) + other.mat.scale(1.0 - weight)))
    }

    /// `U rho U^dagger` for a unitary `U`.
    pub fn conjugate(&self, unitary: &ComplexMatrix) -> Result<Self> {
        if unitary.nrows() != DIM || unitary.ncols() != DIM {
            return Err(Error::DimensionMismatch { expected: DIM, got: unitary.nrows() });
        }
        let out = unitary * &self.mat * unitary.adjoint();
        Ok(Self::from_trusted(out))
    }

    pub fn purity(&self) -> f64 {
        numerics::trace_product_re(&self.mat, &self.mat)
    }
}

pub(crate) fn check_normalized(psi: &[Complex64]) -> Result<()> {
    if psi.len() != DIM {
        return Err(Error::DimensionMismatch { expected: DIM, got: psi.len() });
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > Tolerances::DEFAULT.density {
        return Err(Error::Unnormalized(norm));
    }
    Ok(())
}

/// Single-qubit cut `alpha | rest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bipartition {
    /// A|BC
    A,
    /// B|AC
    B,
    /// C|AB
    C,
}

impl Bipartition {
    pub const ALL: [Bipartition; 3] = [Bipartition::A, Bipartition::B, Bipartition::C];

    /// Bit position of the transposed qubit inside a basis index.
    fn shift(self) -> usize {
        match self {
            Bipartition::A => 2,
            Bipartition::B => 1,
            Bipartition::C => 0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Bipartition::A => 0,
            Bipartition::B => 1,
            Bipartition::C => 2,
        }
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bipartition::A => "A|BC",
            Bipartition::B => "B|AC",
            Bipartition::C => "C|AB",
        })
    }
}

/// Partial transpose of any 8x8 operator on the qubit singled out by `cut`.
pub fn partial_transpose_matrix(m: &ComplexMatrix, cut: Bipartition) -> ComplexMatrix {
    let bit = 1usize << cut.shift();
    ComplexMatrix::from_fn(DIM, DIM, |i, j| {
        // swap the transposed qubit's bit between row and column
        let (bi, bj) = (i & bit, j & bit);
        let src_i = (i & !bit) | bj;
        let src_j = (j & !bit) | bi;
        m[(src_i, src_j)]
    })
}

pub fn partial_transpose(rho: &DensityMatrix, cut: Bipartition) -> ComplexMatrix {
    partial_transpose_matrix(rho.matrix(), cut)
}

/// `(||rho^{T_alpha}||_1 - 1) / 2`, the sum of magnitudes of the negative
/// eigenvalues of the partial transpose.
pub fn negativity(rho: &DensityMatrix, cut: Bipartition) -> f64 {
    let pt = partial_transpose(rho, cut);
    let norm = numerics::trace_norm(&pt).expect("partial transpose of a valid state is Hermitian");
    ((norm - 1.0) / 2.0).max(0.0)
}

pub fn min_negativity(rho: &DensityMatrix) -> f64 {
    Bipartition::ALL
        .iter()
        .map(|&cut| negativity(rho, cut))
        .fold(f64::INFINITY, f64::min)
}

/// GMN of a pure state: the minimum bipartite negativity over the three cuts.
pub fn pure_gmn_oracle(psi: &[Complex64]) -> Result<f64> {
    let rho = DensityMatrix::from_pure(psi)?;
    Ok(min_negativity(&rho))
}

pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let diff = rho.matrix() - sigma.matrix();
    0.5 * numerics::trace_norm(&diff).expect("difference of Hermitian matrices is Hermitian")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fiducial {
    Ghz,
    W,
    Product000,
    MaxMixed,
}

impl FromStr for Fiducial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ghz" => Ok(Fiducial::Ghz),
            "w" => Ok(Fiducial::W),
            "product_000" => Ok(Fiducial::Product000),
            "max_mixed" => Ok(Fiducial::MaxMixed),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

pub fn ghz_vector() -> Vec<Complex64> {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![c64(0.0, 0.0); DIM];
    v[0] = c64(a, 0.0);
    v[7] = c64(a, 0.0);
    v
}

pub fn w_vector() -> Vec<Complex64> {
    let a = 1.0 / 3f64.sqrt();
    let mut v = vec![c64(0.0, 0.0); DIM];
    v[1] = c64(a, 0.0);
    v[2] = c64(a, 0.0);
    v[4] = c64(a, 0.0);
    v
}

pub fn basis_vector(index: usize) -> Vec<Complex64> {
    let mut v = vec![c64(0.0, 0.0); DIM];
    v[index] = c64(1.0, 0.0);
    v
}

pub fn fiducial(name: Fiducial) -> DensityMatrix {
    match name {
        Fiducial::Ghz => DensityMatrix::from_pure(&ghz_vector()).expect("normalized"),
        Fiducial::W => DensityMatrix::from_pure(&w_vector()).expect("normalized"),
        Fiducial::Product000 => DensityMatrix::from_pure(&basis_vector(0)).expect("normalized"),
        Fiducial::MaxMixed => DensityMatrix::maximally_mixed(),
    }
}

/// Looks a fiducial state up by its string name.
pub fn fiducial_by_name(name: &str) -> Result<DensityMatrix> {
    Ok(fiducial(name.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::kron;
    use crate::states::generators::{random_density, random_local_unitary, GeneratorSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_qubit(re00: f64, re11: f64, off: Complex64) -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c64(re00, 0.0), off, off.conj(), c64(re11, 0.0)])
    }

    #[test]
    fn validation_rejects_non_states() {
        assert!(DensityMatrix::new(ComplexMatrix::identity(8, 8)).is_err());
        let mut m = ComplexMatrix::zeros(8, 8);
        m[(0, 0)] = c64(1.5, 0.0);
        m[(1, 1)] = c64(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::identity(4, 4).scale(0.25)).is_err());
    }

    #[test]
    fn ghz_partial_transpose_spectrum() {
        let ghz = fiducial(Fiducial::Ghz);
        for cut in Bipartition::ALL {
            let pt = partial_transpose(&ghz, cut);
            let vals = numerics::eigenvalues(&pt).unwrap();
            assert!((vals[0] + 0.5).abs() < 1e-12, "{vals:?}");
            assert!((numerics::trace_norm(&pt).unwrap() - 2.0).abs() < 1e-12);
            assert!(!numerics::is_psd(&pt, 1e-9).unwrap());
            assert!((negativity(&ghz, cut) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_transpose_of_product_is_local_transpose() {
        let a = one_qubit(0.7, 0.3, c64(0.1, 0.2));
        let bc = kron(&one_qubit(0.6, 0.4, c64(0.05, -0.3)), &one_qubit(0.5, 0.5, c64(0.2, 0.1))).unwrap();
        let rho = DensityMatrix::new(kron(&a, &bc).unwrap()).unwrap();
        let pt = partial_transpose(&rho, Bipartition::A);
        let expected = kron(&a.transpose(), &bc).unwrap();
        assert!((pt - &expected).norm() < 1e-15);
        assert!(numerics::is_psd(&expected, 1e-12).unwrap());
    }

    #[test]
    fn partial_transpose_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(&mut rng, &GeneratorSpec::Ginibre { rank: Some(8) }).unwrap();
        for cut in Bipartition::ALL {
            let twice = partial_transpose_matrix(&partial_transpose(&rho, cut), cut);
            assert_eq!(&twice, rho.matrix());
            let pt = partial_transpose(&rho, cut);
            assert!((pt.trace().re - 1.0).abs() < 1e-12);
            assert!(numerics::hermiticity_residual(&pt) < 1e-15);
        }
    }

    #[test]
    fn w_state_negativity_matches_spectrum() {
        // brute-force spectrum of the W-state partial transpose across A|BC
        let w = fiducial(Fiducial::W);
        let pt = partial_transpose(&w, Bipartition::A);
        let eig = numerics::hermitian_eig(&pt).unwrap();
        let neg: f64 = eig.eigenvalues.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
        assert!((negativity(&w, Bipartition::A) - neg).abs() < 1e-12);
        // closed form sqrt(2) / 3 for the symmetric W state
        assert!((neg - 2f64.sqrt() / 3.0).abs() < 1e-12);
        for cut in Bipartition::ALL {
            assert!((negativity(&w, cut) - neg).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_oracle_examples() {
        assert!(pure_gmn_oracle(&basis_vector(0)).unwrap().abs() < 1e-12);
        assert!((pure_gmn_oracle(&ghz_vector()).unwrap() - 0.5).abs() < 1e-12);
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let mut bell_bc = vec![c64(0.0, 0.0); 8];
        bell_bc[0] = c64(a, 0.0);
        bell_bc[3] = c64(a, 0.0);
        assert!(pure_gmn_oracle(&bell_bc).unwrap().abs() < 1e-12);
        let mut bad = ghz_vector();
        bad[0] *= 2.0;
        assert!(matches!(pure_gmn_oracle(&bad), Err(Error::Unnormalized(_))));
    }

    #[test]
    fn trace_distance_examples() {
        let ghz = fiducial(Fiducial::Ghz);
        assert!(trace_distance(&ghz, &ghz).abs() < 1e-14);
        let zero = DensityMatrix::from_pure(&basis_vector(0)).unwrap();
        let seven = DensityMatrix::from_pure(&basis_vector(7)).unwrap();
        assert!((trace_distance(&zero, &seven) - 1.0).abs() < 1e-14);
        // I/8 - GHZ has eigenvalue 1/8 - 1 once and 1/8 seven times
        let mixed = fiducial(Fiducial::MaxMixed);
        let diff = mixed.matrix() - ghz.matrix();
        let oracle: f64 = 0.5 * numerics::eigenvalues(&diff).unwrap().iter().map(|x| x.abs()).sum::<f64>();
        assert!((trace_distance(&mixed, &ghz) - oracle).abs() < 1e-14);
        assert!((oracle - 0.875).abs() < 1e-12);
    }

    #[test]
    fn fiducial_names() {
        assert_eq!(fiducial_by_name("max_mixed").unwrap(), DensityMatrix::maximally_mixed());
        assert!(matches!(fiducial_by_name("cluster"), Err(Error::UnknownName(_))));
        let ghz = fiducial(Fiducial::Ghz);
        assert!((ghz.matrix()[(0, 7)].re - 0.5).abs() < 1e-15);
        let w = fiducial(Fiducial::W);
        assert!((w.matrix()[(1, 4)].re - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn negativity_bounded_and_lu_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&mut rng, &GeneratorSpec::Ginibre { rank: None }).unwrap();
            let u = random_local_unitary(&mut rng);
            let rotated = rho.conjugate(&u).unwrap();
            for cut in Bipartition::ALL {
                let n = negativity(&rho, cut);
                prop_assert!((0.0..=0.5 + 1e-12).contains(&n));
                prop_assert!((n - negativity(&rotated, cut)).abs() < 1e-8);
            }
        }

        #[test]
        fn trace_distance_is_metric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = GeneratorSpec::Ginibre { rank: None };
            let a = random_density(&mut rng, &spec).unwrap();
            let b = random_density(&mut rng, &spec).unwrap();
            let c = random_density(&mut rng, &spec).unwrap();
            let ab = trace_distance(&a, &b);
            prop_assert!((0.0..=1.0 + 1e-10).contains(&ab));
            prop_assert!((ab - trace_distance(&b, &a)).abs() < 1e-10);
            prop_assert!(trace_distance(&a, &a) < 1e-10);
            prop_assert!(ab <= trace_distance(&a, &c) + trace_distance(&c, &b) + 1e-10);
        }
    }
}
