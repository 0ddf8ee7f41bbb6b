//! Hermitian spectral calculus: eigendecomposition, propagators, entropy.

use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::tol::Tolerances;

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V f(Λ) V†` for a scalar function of the eigenvalues.
    pub fn apply_function(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let weights: Vec<C64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        // (V W) V† with W diagonal
        let mut vw = v.clone();
        for i in 0..n {
            for (j, w) in weights.iter().enumerate() {
                vw[(i, j)] *= w;
            }
        }
        &vw * &v.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_function(|l| C64::new(l, 0.0))
    }

    /// `exp(-i H t)` for the decomposed `H`.
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        if t == 0.0 {
            return ComplexMatrix::identity(self.dim());
        }
        self.apply_function(|l| C64::from_polar(1.0, -l * t))
    }

    /// `exp(-i H t) |ψ⟩` without forming the propagator.
    pub fn evolve_vector(&self, t: f64, psi: &[C64]) -> Vec<C64> {
        let v = &self.eigenvectors;
        let coeffs = v.adjoint().matvec(psi);
        let phased: Vec<C64> = coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, &l)| c * C64::from_polar(1.0, -l * t))
            .collect();
        v.matvec(&phased)
    }

    /// Number of eigenvalues with magnitude above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|l| l.abs() > tol).count()
    }
}

pub fn hermitian_spectrum(a: &ComplexMatrix) -> Result<Spectrum> {
    hermitian_spectrum_with(a, &Tolerances::default())
}

/// Eigendecomposition with explicit tolerances; fails on non-Hermitian input or
/// when the reconstruction error exceeds `tol.recon` (scaled by `max(1, max|a_ij|)`).
pub fn hermitian_spectrum_with(a: &ComplexMatrix, tol: &Tolerances) -> Result<Spectrum> {
    let n = a.require_square("hermitian spectrum input")?;
    let asym = a.hermiticity_defect();
    if asym > tol.herm {
        return Err(Error::NotHermitian {
            max_asymmetry: asym,
        });
    }
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: vec![],
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let h = a.hermitian_part();
    let m = DMatrix::<C64>::from_fn(n, n, |i, j| h.get(i, j));
    let eig = SymmetricEigen::new(m);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = ComplexMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vecs[(row, col)] = eig.eigenvectors[(row, k)];
        }
    }
    let spectrum = Spectrum {
        eigenvalues,
        eigenvectors: vecs,
    };
    let error = (&spectrum.reconstruct() - &h).max_abs();
    let allowed = tol.recon * h.max_abs().max(1.0);
    if error > allowed {
        return Err(Error::Reconstruction {
            error,
            tol: allowed,
        });
    }
    Ok(spectrum)
}

/// `exp(-i h t)`; exactly the identity at `t = 0`.
pub fn unitary_exp(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let n = h.require_square("Hamiltonian")?;
    if t == 0.0 {
        let asym = h.hermiticity_defect();
        if asym > Tolerances::default().herm {
            return Err(Error::NotHermitian {
                max_asymmetry: asym,
            });
        }
        return Ok(ComplexMatrix::identity(n));
    }
    Ok(hermitian_spectrum(h)?.propagator(t))
}

/// Von Neumann entropy in bits.
///
/// Eigenvalues in `[-tol.psd, 0]` are treated as zero; anything lower is an error.
pub fn von_neumann_entropy(rho: &ComplexMatrix) -> Result<f64> {
    von_neumann_entropy_with(rho, &Tolerances::default())
}

pub fn von_neumann_entropy_with(rho: &ComplexMatrix, tol: &Tolerances) -> Result<f64> {
    let spectrum = hermitian_spectrum_with(rho, tol)?;
    entropy_of_eigenvalues(&spectrum.eigenvalues, tol.psd)
}

pub(crate) fn entropy_of_eigenvalues(eigenvalues: &[f64], psd_floor: f64) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigenvalues {
        if l < -psd_floor {
            return Err(Error::NegativeEigenvalue { value: l });
        }
        if l > 0.0 {
            s -= l * l.log2();
        }
    }
    let max = (eigenvalues.len().max(1) as f64).log2();
    Ok(s.clamp(0.0, max))
}

/// Numerical rank of a Hermitian matrix.
pub fn hermitian_rank(a: &ComplexMatrix, tol: f64) -> Result<usize> {
    Ok(hermitian_spectrum(a)?.rank(tol))
}
