//! Seeded random operators for test inputs.
//!
//! Every generator is a pure function of `(dim, seed)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::{inner, ComplexMatrix, C64};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Complex Ginibre matrix with i.i.d. standard normal real and imaginary parts.
pub fn random_ginibre(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    let mut r = rng(seed);
    let data = (0..rows * cols).map(|_| gaussian(&mut r)).collect();
    ComplexMatrix::from_vec(rows, cols, data).expect("finite gaussian samples")
}

/// Haar-distributed unitary via Gram–Schmidt on a Ginibre matrix.
///
/// Gram–Schmidt yields `R` with a positive real diagonal, which is the phase
/// fixing that makes the `Q` factor Haar distributed.
pub fn random_unitary(dim: usize, seed: u64) -> ComplexMatrix {
    let g = random_ginibre(dim, dim, seed);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut v = g.column(j);
        // two passes keep the columns orthonormal to machine precision
        for _ in 0..2 {
            for q in &cols {
                let c = inner(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = super::matrix::vector_norm(&v);
        for vi in &mut v {
            *vi /= norm;
        }
        cols.push(v);
    }
    ComplexMatrix::from_columns(&cols).expect("square column set")
}

/// Random full-rank density operator `G G† / Tr(G G†)`.
pub fn random_density(dim: usize, seed: u64) -> ComplexMatrix {
    let g = random_ginibre(dim, dim, seed);
    let rho = &g * &g.adjoint();
    let tr = rho.trace().re;
    rho.scale_real(1.0 / tr).hermitian_part()
}

/// Random Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
    random_ginibre(dim, dim, seed).hermitian_part()
}

/// Random unit vector.
pub fn random_state_vector(dim: usize, seed: u64) -> Vec<C64> {
    let mut r = rng(seed);
    let mut v: Vec<C64> = (0..dim).map(|_| gaussian(&mut r)).collect();
    let norm = super::matrix::vector_norm(&v);
    for z in &mut v {
        *z /= norm;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_is_unitary() {
        for (d, s) in [(1, 0), (2, 1), (5, 2), (16, 3)] {
            let u = random_unitary(d, s);
            assert!(u.unitarity_defect() <= 1e-12);
        }
    }

    #[test]
    fn density_has_unit_trace_and_is_psd() {
        let rho = random_density(6, 9);
        assert!((rho.trace() - C64::new(1.0, 0.0)).norm() <= 1e-12);
        let s = crate::tensor::hermitian_spectrum(&rho).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn generators_are_deterministic_per_seed() {
        assert_eq!(random_unitary(4, 42), random_unitary(4, 42));
        assert_eq!(random_density(4, 42), random_density(4, 42));
        assert_ne!(random_unitary(4, 42), random_unitary(4, 43));
    }
}
