//! Numerical tolerances shared across the crate.

/// Absolute tolerances used by validation routines.
///
/// Every validating function has a `_with` variant that accepts an explicit
/// `Tolerances`; the plain variant uses [`Tolerances::default`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max entrywise `|a_ij - conj(a_ji)|`.
    pub herm: f64,
    /// Floor below which an eigenvalue counts as negative.
    pub psd: f64,
    /// Max entrywise error of `V diag(λ) V†` against the input.
    pub recon: f64,
    /// `|Tr ρ - 1|`.
    pub trace: f64,
    /// Frobenius defects of projector-family exclusivity and exhaustivity.
    pub proj: f64,
    /// Max entrywise `|U†U - I|`.
    pub unitary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            psd: 1e-10,
            recon: 1e-9,
            trace: 1e-10,
            proj: 1e-10,
            unitary: 1e-9,
        }
    }
}
