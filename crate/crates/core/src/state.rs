//! Validated quantum objects: density operators, projector families and
//! reference states of the environment.
//!
//! Constructors validate eagerly. The `*_unchecked` constructors are
//! crate-private and reserved for intermediate values whose invariants hold
//! by construction.

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{
    hermitian_spectrum, hermitian_spectrum_with, inner, kron, vector_norm, ComplexMatrix,
    CompositeSpace, C64,
};
use crate::tol::Tolerances;

/// A density operator `ρ` on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    space: CompositeSpace,
}

/// Invariant defects of a candidate density operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityDefects {
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
    pub trace_error: f64,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix, space: CompositeSpace) -> Result<Self> {
        Self::new_with(matrix, space, &Tolerances::default())
    }

    pub fn new_with(matrix: ComplexMatrix, space: CompositeSpace, tol: &Tolerances) -> Result<Self> {
        matrix.require_dim(space.total_dim(), "density operator")?;
        let rho = Self { matrix, space };
        rho.revalidate_with(tol)?;
        Ok(rho)
    }

    /// Density operator on a single-factor space.
    pub fn single(matrix: ComplexMatrix) -> Result<Self> {
        let n = matrix.require_square("density operator")?;
        Self::new(matrix, CompositeSpace::single(n)?)
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix, space: CompositeSpace) -> Self {
        debug_assert_eq!(matrix.rows(), space.total_dim());
        Self { matrix, space }
    }

    pub fn maximally_mixed(space: CompositeSpace) -> Self {
        let d = space.total_dim();
        Self {
            matrix: ComplexMatrix::identity(d).scale_real(1.0 / d as f64),
            space,
        }
    }

    /// `ρ_0 ⊗ ρ_1 ⊗ …` on the concatenated space.
    pub fn product(states: &[&DensityOperator]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("product of zero states".into()));
        }
        let mut dims = Vec::new();
        let mut m = ComplexMatrix::identity(1);
        for s in states {
            dims.extend_from_slice(s.space.factor_dims());
            m = kron(&m, &s.matrix);
        }
        Ok(Self::new_unchecked(m, CompositeSpace::new(dims)?))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn purity(&self) -> f64 {
        ComplexMatrix::trace_product(&self.matrix, &self.matrix).re
    }

    pub fn defects(&self) -> Result<DensityDefects> {
        let spectrum = hermitian_spectrum_with(
            &self.matrix,
            &Tolerances {
                herm: f64::INFINITY,
                ..Tolerances::default()
            },
        )?;
        Ok(DensityDefects {
            hermiticity: self.matrix.hermiticity_defect(),
            min_eigenvalue: spectrum.eigenvalues.last().copied().unwrap_or(0.0),
            trace_error: (self.matrix.trace() - C64::new(1.0, 0.0)).norm(),
        })
    }

    pub fn revalidate(&self) -> Result<()> {
        self.revalidate_with(&Tolerances::default())
    }

    pub fn revalidate_with(&self, tol: &Tolerances) -> Result<()> {
        let asym = self.matrix.hermiticity_defect();
        if asym > tol.herm {
            return Err(Error::NotHermitian {
                max_asymmetry: asym,
            });
        }
        let tr = self.matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol.trace {
            return Err(Error::TraceNotUnit { trace: tr.re });
        }
        let spectrum = hermitian_spectrum_with(&self.matrix, tol)?;
        if let Some(&min) = spectrum.eigenvalues.last() {
            if min < -tol.psd {
                return Err(Error::NegativeEigenvalue { value: min });
            }
        }
        Ok(())
    }
}

/// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩` on a single-factor space.
pub fn pure_density(psi: &[C64]) -> Result<DensityOperator> {
    pure_density_on(psi, CompositeSpace::single(psi.len().max(1))?)
}

/// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩` on the given composite space.
pub fn pure_density_on(psi: &[C64], space: CompositeSpace) -> Result<DensityOperator> {
    if psi.len() != space.total_dim() {
        return Err(Error::DimensionMismatch {
            context: "state vector",
            expected: space.total_dim(),
            found: psi.len(),
        });
    }
    let norm = vector_norm(psi);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidArgument(
            "state vector must be nonzero and finite".into(),
        ));
    }
    let unit: Vec<C64> = psi.iter().map(|z| z / norm).collect();
    let m = ComplexMatrix::outer(&unit, &unit).hermitian_part();
    Ok(DensityOperator::new_unchecked(m, space))
}

/// An exclusive and exhaustive set of projectors `{P_α}` with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorFamily {
    projectors: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

/// Defects reported by [`validate_family`]. Norms are Frobenius except
/// Hermiticity, which is the max entrywise asymmetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyReport {
    /// `max_{α,β} ‖P_α P_β − δ_{αβ} P_α‖`.
    pub exclusivity_defect: f64,
    pub hermiticity_defect: f64,
    /// `‖Σ_α P_α − I‖`.
    pub completeness_defect: f64,
    pub tol: f64,
    pub passes: bool,
}

impl ProjectorFamily {
    pub fn new(projectors: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        Self::new_with(projectors, labels, &Tolerances::default())
    }

    pub fn new_with(projectors: Vec<ComplexMatrix>, labels: Vec<String>, tol: &Tolerances) -> Result<Self> {
        let family = Self::checked_shape(projectors, labels)?;
        let report = validate_family(&family, tol.proj.max(tol.herm));
        if !report.passes {
            return Err(Error::InvalidFamily(format!(
                "exclusivity defect {:.3e}, hermiticity defect {:.3e}, completeness defect {:.3e}",
                report.exclusivity_defect, report.hermiticity_defect, report.completeness_defect
            )));
        }
        Ok(family)
    }

    /// Shape checks only; algebraic invariants are the caller's responsibility.
    pub(crate) fn new_unchecked(projectors: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        Self::checked_shape(projectors, labels)
    }

    fn checked_shape(projectors: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::InvalidFamily("family has no projectors".into()));
        }
        if projectors.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "family labels",
                expected: projectors.len(),
                found: labels.len(),
            });
        }
        let d = projectors[0].require_square("projector")?;
        for p in &projectors {
            p.require_dim(d, "projector")?;
        }
        Ok(Self { projectors, labels })
    }

    /// The trivial family `{I}`.
    pub fn trivial(dim: usize) -> Self {
        Self {
            projectors: vec![ComplexMatrix::identity(dim)],
            labels: vec!["I".into()],
        }
    }

    /// Computational (z) basis projectors labelled `0, 1, …`.
    pub fn computational(dim: usize) -> Self {
        let projectors = (0..dim)
            .map(|k| {
                let mut p = ComplexMatrix::zeros(dim, dim);
                p[(k, k)] = C64::new(1.0, 0.0);
                p
            })
            .collect();
        Self {
            projectors,
            labels: (0..dim).map(|k| k.to_string()).collect(),
        }
    }

    /// Qubit `{|+⟩⟨+|, |−⟩⟨−|}` labelled `+, -`.
    pub fn qubit_x() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [C64::new(h, 0.0), C64::new(h, 0.0)];
        let minus = [C64::new(h, 0.0), C64::new(-h, 0.0)];
        Self {
            projectors: vec![
                ComplexMatrix::outer(&plus, &plus),
                ComplexMatrix::outer(&minus, &minus),
            ],
            labels: vec!["+".into(), "-".into()],
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.projectors.len() {
            return Err(Error::DimensionMismatch {
                context: "family labels",
                expected: self.projectors.len(),
                found: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].rows()
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn projector(&self, index: usize) -> Result<&ComplexMatrix> {
        self.projectors.get(index).ok_or(Error::IndexOutOfRange {
            context: "projector family",
            index,
            len: self.projectors.len(),
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// The same family acting on `factor` of `space` (`P ⊗ I` style).
    pub fn embedded(&self, space: &CompositeSpace, factor: usize) -> Result<Self> {
        let projectors = self
            .projectors
            .iter()
            .map(|p| crate::tensor::embed(p, space, factor))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            projectors,
            labels: self.labels.clone(),
        })
    }

    /// `{U P_α U†}`.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<Self> {
        u.require_dim(self.dim(), "conjugating unitary")?;
        Ok(Self {
            projectors: self.projectors.iter().map(|p| p.conjugate_by(u)).collect(),
            labels: self.labels.clone(),
        })
    }
}

impl fmt::Display for ProjectorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.labels.join(", "))
    }
}

pub fn validate_family(f: &ProjectorFamily, tol: f64) -> FamilyReport {
    let d = f.dim();
    let mut exclusivity: f64 = 0.0;
    let mut hermiticity: f64 = 0.0;
    let mut sum = ComplexMatrix::zeros(d, d);
    for (a, pa) in f.projectors.iter().enumerate() {
        hermiticity = hermiticity.max(pa.hermiticity_defect());
        sum += pa;
        for (b, pb) in f.projectors.iter().enumerate() {
            let prod = pa * pb;
            let defect = if a == b {
                (&prod - pa).frobenius_norm()
            } else {
                prod.frobenius_norm()
            };
            exclusivity = exclusivity.max(defect);
        }
    }
    let completeness = (&sum - &ComplexMatrix::identity(d)).frobenius_norm();
    FamilyReport {
        exclusivity_defect: exclusivity,
        hermiticity_defect: hermiticity,
        completeness_defect: completeness,
        tol,
        passes: exclusivity <= tol && hermiticity <= tol && completeness <= tol,
    }
}

/// Checks that `partition` is a disjoint cover of `0..n` with nonempty blocks.
pub fn validate_partition(partition: &[Vec<usize>], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for (b, block) in partition.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::InvalidPartition(format!("block {b} is empty")));
        }
        for &i in block {
            if i >= n {
                return Err(Error::InvalidPartition(format!(
                    "index {i} in block {b} is out of range for {n} members"
                )));
            }
            if seen[i] {
                return Err(Error::InvalidPartition(format!("index {i} appears twice")));
            }
            seen[i] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidPartition(format!("index {missing} is not covered")));
    }
    Ok(())
}

/// Projectors `Σ_{i∈g} |v_i⟩⟨v_i|`, one per group (default: one per vector).
///
/// The vectors must be orthonormal and span the space.
pub fn family_from_basis(vectors: &[Vec<C64>], grouping: Option<&[Vec<usize>]>) -> Result<ProjectorFamily> {
    family_from_basis_with(vectors, grouping, &Tolerances::default())
}

pub fn family_from_basis_with(
    vectors: &[Vec<C64>],
    grouping: Option<&[Vec<usize>]>,
    tol: &Tolerances,
) -> Result<ProjectorFamily> {
    let d = vectors.first().map(Vec::len).unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidFamily("no basis vectors supplied".into()));
    }
    for v in vectors {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                context: "basis vector",
                expected: d,
                found: v.len(),
            });
        }
    }
    for (i, u) in vectors.iter().enumerate() {
        for (j, v) in vectors.iter().enumerate().skip(i) {
            let expected = if i == j { 1.0 } else { 0.0 };
            let defect = (inner(u, v) - C64::new(expected, 0.0)).norm();
            if defect > tol.proj {
                return Err(Error::InvalidFamily(format!(
                    "basis vectors {i} and {j} are not orthonormal (defect {defect:.3e})"
                )));
            }
        }
    }
    if vectors.len() != d {
        return Err(Error::InvalidFamily(format!(
            "exhaustivity violated: {} orthonormal vectors cannot span dimension {d}",
            vectors.len()
        )));
    }
    let singletons: Vec<Vec<usize>>;
    let groups = match grouping {
        Some(g) => g,
        None => {
            singletons = (0..d).map(|i| vec![i]).collect();
            &singletons
        }
    };
    validate_partition(groups, d)?;
    let mut projectors = Vec::with_capacity(groups.len());
    let mut labels = Vec::with_capacity(groups.len());
    for g in groups {
        let mut p = ComplexMatrix::zeros(d, d);
        for &i in g {
            p += &ComplexMatrix::outer(&vectors[i], &vectors[i]);
        }
        projectors.push(p.hermitian_part());
        labels.push(g.iter().map(usize::to_string).collect::<Vec<_>>().join("+"));
    }
    ProjectorFamily::new_with(projectors, labels, tol)
}

/// Sums projectors over each block of `partition` (indices into the family).
///
/// Block labels join member labels with `|`.
pub fn coarse_grain_family(f: &ProjectorFamily, partition: &[Vec<usize>]) -> Result<ProjectorFamily> {
    validate_partition(partition, f.len())?;
    let d = f.dim();
    let mut projectors = Vec::with_capacity(partition.len());
    let mut labels = Vec::with_capacity(partition.len());
    for block in partition {
        let mut p = ComplexMatrix::zeros(d, d);
        for &i in block {
            p += &f.projectors[i];
        }
        projectors.push(p);
        labels.push(
            block
                .iter()
                .map(|&i| f.labels[i].as_str())
                .collect::<Vec<_>>()
                .join("|"),
        );
    }
    ProjectorFamily::new_unchecked(projectors, labels)
}

/// Like [`coarse_grain_family`] but with blocks given by member labels.
pub fn coarse_grain_by_labels(f: &ProjectorFamily, blocks: &[Vec<&str>]) -> Result<ProjectorFamily> {
    let partition = blocks
        .iter()
        .map(|block| {
            block
                .iter()
                .map(|l| {
                    f.label_index(l)
                        .ok_or_else(|| Error::InvalidPartition(format!("unknown label {l:?}")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    coarse_grain_family(f, &partition)
}

/// Which environment state `ω` a reference was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceKind {
    CompleteIgnorance,
    Thermal { beta: f64 },
    Explicit,
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceKind::CompleteIgnorance => write!(f, "complete_ignorance"),
            ReferenceKind::Thermal { beta } => write!(f, "thermal(beta={beta})"),
            ReferenceKind::Explicit => write!(f, "explicit"),
        }
    }
}

/// Request for a reference environment state.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSpec {
    CompleteIgnorance { dim_env: usize },
    Thermal { h_env: Option<ComplexMatrix>, beta: f64 },
    Explicit { matrix: ComplexMatrix },
}

/// Reference state `ω` of the environment used by the linear part of the
/// reduced-dynamics decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEnvState {
    kind: ReferenceKind,
    matrix: ComplexMatrix,
}

impl ReferenceEnvState {
    /// `I / dim`.
    pub fn complete_ignorance(dim_env: usize) -> Self {
        Self {
            kind: ReferenceKind::CompleteIgnorance,
            matrix: ComplexMatrix::identity(dim_env).scale_real(1.0 / dim_env as f64),
        }
    }

    /// Gibbs state `exp(−βH)/Z`; exactly `I/dim` at `β = 0`.
    pub fn thermal(h_env: &ComplexMatrix, beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "inverse temperature must be finite and non-negative, got {beta}"
            )));
        }
        let d = h_env.require_square("environment Hamiltonian")?;
        if beta == 0.0 {
            let asym = h_env.hermiticity_defect();
            if asym > Tolerances::default().herm {
                return Err(Error::NotHermitian {
                    max_asymmetry: asym,
                });
            }
            return Ok(Self {
                kind: ReferenceKind::Thermal { beta },
                matrix: ComplexMatrix::identity(d).scale_real(1.0 / d as f64),
            });
        }
        let spectrum = hermitian_spectrum(h_env)?;
        let ground = spectrum.eigenvalues.last().copied().unwrap_or(0.0);
        let z: f64 = spectrum
            .eigenvalues
            .iter()
            .map(|&e| (-beta * (e - ground)).exp())
            .sum();
        let matrix = spectrum
            .apply_function(|e| C64::new((-beta * (e - ground)).exp() / z, 0.0))
            .hermitian_part();
        Ok(Self {
            kind: ReferenceKind::Thermal { beta },
            matrix,
        })
    }

    pub fn explicit(matrix: ComplexMatrix) -> Result<Self> {
        let rho = DensityOperator::single(matrix)?;
        Ok(Self {
            kind: ReferenceKind::Explicit,
            matrix: rho.into_matrix(),
        })
    }

    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Same kind and entrywise equal within `1e-12`.
    pub fn same_as(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.dim() == other.dim()
            && (&self.matrix - &other.matrix).max_abs() <= 1e-12
    }
}

pub fn reference_env_state(spec: &ReferenceSpec) -> Result<ReferenceEnvState> {
    match spec {
        ReferenceSpec::CompleteIgnorance { dim_env } => {
            if *dim_env == 0 {
                return Err(Error::InvalidArgument("environment dimension must be positive".into()));
            }
            Ok(ReferenceEnvState::complete_ignorance(*dim_env))
        }
        ReferenceSpec::Thermal { h_env: Some(h), beta } => ReferenceEnvState::thermal(h, *beta),
        ReferenceSpec::Thermal { h_env: None, .. } => Err(Error::InvalidArgument(
            "thermal reference state requires an environment Hamiltonian".into(),
        )),
        ReferenceSpec::Explicit { matrix } => ReferenceEnvState::explicit(matrix.clone()),
    }
}
