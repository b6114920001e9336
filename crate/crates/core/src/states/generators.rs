//! Random three-qubit state ensembles.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::density::{fiducial, DensityMatrix, Fiducial, DIM};
use crate::error::{Error, Result};
use crate::numerics::{c64, kron, ComplexMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// `G G^dagger / Tr(G G^dagger)` with `G` an 8 x rank complex Gaussian
    /// matrix; `rank: None` draws the rank uniformly from 1..=8.
    Ginibre { rank: Option<usize> },
    /// Haar-random pure state.
    PureRandom,
    /// Convex mixture of states that are each a product across one cut.
    BiseparableMix { components: usize },
    /// `p |GHZ><GHZ| + (1 - p) I/8`.
    GhzNoise { p: f64 },
    /// Fully product state of three random qubits.
    Product,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GeneratorSpec::Ginibre { rank: Some(k) } if !(1..=DIM).contains(&k) => {
                Err(Error::InvalidParameter(format!("Ginibre rank {k} outside 1..=8")))
            }
            GeneratorSpec::BiseparableMix { components } if components == 0 => {
                Err(Error::InvalidParameter("biseparable mixture needs at least one component".into()))
            }
            GeneratorSpec::GhzNoise { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::InvalidParameter(format!("GHZ weight {p} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// True for ensembles whose members are biseparable by construction.
    pub fn is_biseparable(&self) -> bool {
        matches!(self, GeneratorSpec::BiseparableMix { .. } | GeneratorSpec::Product)
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Ginibre { rank: Some(k) } => write!(f, "ginibre(rank={k})"),
            GeneratorSpec::Ginibre { rank: None } => write!(f, "ginibre(rank=any)"),
            GeneratorSpec::PureRandom => write!(f, "pure_random"),
            GeneratorSpec::BiseparableMix { components } => write!(f, "biseparable_mix({components})"),
            GeneratorSpec::GhzNoise { p } => write!(f, "ghz_noise({p})"),
            GeneratorSpec::Product => write!(f, "product"),
        }
    }
}

/// Independent RNG stream for sample `index` under `master` seed, so that
/// datasets do not depend on the order in which samples are drawn.
pub fn sample_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Hilbert-Schmidt-type random state of dimension `dim` and given rank.
fn ginibre<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> ComplexMatrix {
    let g = gaussian_matrix(dim, rank, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let m = m.unscale(tr);
    (&m + m.adjoint()).scale(0.5)
}

fn ginibre_any_rank<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let rank = rng.gen_range(1..=dim);
    ginibre(dim, rank, rng)
}

/// Haar-random unitary via Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let mut q = gaussian_matrix(n, n, rng);
    for j in 0..n {
        for k in 0..j {
            let proj = (0..n).fold(c64(0.0, 0.0), |acc, i| acc + q[(i, k)].conj() * q[(i, j)]);
            for i in 0..n {
                let v = q[(i, k)];
                q[(i, j)] -= proj * v;
            }
        }
        let norm = (0..n).map(|i| q[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            q[(i, j)] /= norm;
        }
    }
    q
}

/// `U_A (x) U_B (x) U_C` with Haar-random single-qubit factors.
pub fn random_local_unitary<R: Rng + ?Sized>(rng: &mut R) -> ComplexMatrix {
    let a = random_unitary(2, rng);
    let b = random_unitary(2, rng);
    let c = random_unitary(2, rng);
    kron(&kron(&a, &b).expect("4x4"), &c).expect("8x8")
}

fn random_pure_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec<num_complex::Complex64> {
    let g = gaussian_matrix(DIM, 1, rng);
    let norm = g.norm();
    g.iter().map(|z| z / norm).collect()
}

/// Reorders qubits: output qubit `q` is input qubit `perm[q]`.
fn permute_qubits(m: &ComplexMatrix, perm: [usize; 3]) -> ComplexMatrix {
    let map = |idx: usize| -> usize {
        let mut out = 0;
        for (q, &src) in perm.iter().enumerate() {
            let bit = (idx >> (2 - src)) & 1;
            out |= bit << (2 - q);
        }
        out
    };
    let mut inverse = [0usize; DIM];
    for (i, slot) in inverse.iter_mut().enumerate() {
        *slot = map(i);
    }
    ComplexMatrix::from_fn(DIM, DIM, |i, j| m[(inverse[i], inverse[j])])
}

fn biseparable_component<R: Rng + ?Sized>(rng: &mut R) -> ComplexMatrix {
    let single = ginibre_any_rank(2, rng);
    let pair = ginibre_any_rank(4, rng);
    match rng.gen_range(0..3) {
        0 => kron(&single, &pair).expect("8x8"),
        1 => {
            // B (x) AC, then move qubit order (B, A, C) -> (A, B, C)
            let m = kron(&single, &pair).expect("8x8");
            permute_qubits(&m, [1, 0, 2])
        }
        _ => kron(&pair, &single).expect("8x8"),
    }
}

pub fn random_density<R: Rng + ?Sized>(rng: &mut R, spec: &GeneratorSpec) -> Result<DensityMatrix> {
    spec.validate()?;
    let mat = match *spec {
        GeneratorSpec::Ginibre { rank } => {
            let k = rank.unwrap_or_else(|| rng.gen_range(1..=DIM));
            ginibre(DIM, k, rng)
        }
        GeneratorSpec::PureRandom => {
            let psi = random_pure_vector(rng);
            return DensityMatrix::from_pure(&psi);
        }
        GeneratorSpec::BiseparableMix { components } => {
            let weights: Vec<f64> = (0..components).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = weights.iter().sum();
            let mut acc = ComplexMatrix::zeros(DIM, DIM);
            for w in weights {
                acc += biseparable_component(rng).scale(w / total);
            }
            acc
        }
        GeneratorSpec::GhzNoise { p } => {
            let ghz = fiducial(Fiducial::Ghz);
            return ghz.mix(&DensityMatrix::maximally_mixed(), p);
        }
        GeneratorSpec::Product => {
            let a = ginibre_any_rank(2, rng);
            let b = ginibre_any_rank(2, rng);
            let c = ginibre_any_rank(2, rng);
            kron(&kron(&a, &b).expect("4x4"), &c).expect("8x8")
        }
    };
    DensityMatrix::new(mat)
}

/// Haar-random normalized pure state vector.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R) -> Vec<num_complex::Complex64> {
    random_pure_vector(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics;
    use crate::states::density::{negativity, Bipartition};

    #[test]
    fn product_states_are_ppt() {
        let mut rng = sample_rng(1, 0);
        for _ in 0..50 {
            let rho = random_density(&mut rng, &GeneratorSpec::Product).unwrap();
            for cut in Bipartition::ALL {
                assert!(negativity(&rho, cut) < 1e-12);
            }
        }
    }

    #[test]
    fn full_rank_ginibre_is_valid() {
        let mut rng = sample_rng(2, 0);
        let rho = random_density(&mut rng, &GeneratorSpec::Ginibre { rank: Some(8) }).unwrap();
        let vals = numerics::eigenvalues(rho.matrix()).unwrap();
        assert!(vals[0] > 1e-8, "rank-8 draw should be full rank: {vals:?}");
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ghz_noise_endpoints() {
        let mut rng = sample_rng(3, 0);
        let rho = random_density(&mut rng, &GeneratorSpec::GhzNoise { p: 1.0 }).unwrap();
        assert_eq!(rho, fiducial(Fiducial::Ghz));
        let rho = random_density(&mut rng, &GeneratorSpec::GhzNoise { p: 0.0 }).unwrap();
        assert_eq!(rho, DensityMatrix::maximally_mixed());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut rng = sample_rng(4, 0);
        for spec in [
            GeneratorSpec::Ginibre { rank: Some(0) },
            GeneratorSpec::Ginibre { rank: Some(9) },
            GeneratorSpec::BiseparableMix { components: 0 },
            GeneratorSpec::GhzNoise { p: 1.5 },
        ] {
            assert!(matches!(random_density(&mut rng, &spec), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn counter_seeding_is_reproducible() {
        let spec = GeneratorSpec::Ginibre { rank: None };
        let a = random_density(&mut sample_rng(9, 17), &spec).unwrap();
        let b = random_density(&mut sample_rng(9, 17), &spec).unwrap();
        let c = random_density(&mut sample_rng(9, 18), &spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn qubit_permutation_moves_factors() {
        let zero = ComplexMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
        let half = numerics::identity(2).scale(0.5);
        let one = ComplexMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        // input order (B, A, C) = (|0><0|, I/2, |1><1|)
        let input = kron(&kron(&zero, &half).unwrap(), &one).unwrap();
        let expected = kron(&kron(&half, &zero).unwrap(), &one).unwrap();
        assert_eq!(permute_qubits(&input, [1, 0, 2]), expected);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = sample_rng(5, 0);
        let u = random_local_unitary(&mut rng);
        assert!((u.adjoint() * &u - numerics::identity(8)).norm() < 1e-12);
    }

    /// Many draws from every generator stay valid density matrices.
    #[test]
    fn ensembles_stay_physical() {
        let specs = [
            GeneratorSpec::Ginibre { rank: None },
            GeneratorSpec::PureRandom,
            GeneratorSpec::BiseparableMix { components: 3 },
            GeneratorSpec::GhzNoise { p: 0.4 },
            GeneratorSpec::Product,
        ];
        let mut rng = sample_rng(6, 0);
        for i in 0..10_000 {
            let spec = &specs[i % specs.len()];
            let rho = random_density(&mut rng, spec).unwrap();
            let m = rho.matrix();
            assert!(numerics::hermiticity_residual(m) < 1e-10);
            assert!((m.trace().re - 1.0).abs() < 1e-10);
            assert!(numerics::eigenvalues(m).unwrap()[0] >= -1e-10);
        }
    }
}
