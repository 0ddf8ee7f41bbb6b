//! Class operators, history probabilities and decoherence matrices.
//!
//! Conventions, fixed throughout the crate:
//!
//! - `P(t_i) = U(t_0→t_i)† P U(t_0→t_i)` (Heisenberg picture).
//! - `C_α = P_{α_1}(t_1) P_{α_2}(t_2) ⋯ P_{α_n}(t_n)`.
//! - `p(α) = Tr(C_α† ρ C_α)` and `D(α, β) = Tr(C_α† ρ C_β)`.
//!
//! Worked 2×2 example with `U = I`, `ρ = |+⟩⟨+|`, `α = (z0, x+)`,
//! `β = (z1, x+)`: `C_α = |0⟩⟨0|+⟩⟨+|`, so `Tr C_α = 1/2`,
//! `C_α† ρ C_β = |+⟩⟨+|0⟩⟨0|+⟩⟨+|1⟩⟨1|+⟩⟨+|` and `D(α, β) = 1/4`.
//!
//! Histories are enumerated lexicographically (last time index fastest).

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{PropagatorSet, Schedule};
use crate::state::{coarse_grain_family, DensityOperator, ProjectorFamily};
use crate::tensor::{ComplexMatrix, CompositeSpace, C64};

/// Default maximum number of histories in a set.
pub const DEFAULT_HISTORY_CAP: usize = 4096;

/// Diagonal below which a branch counts as empty in decoherence checks.
pub const DEFAULT_P_FLOOR: f64 = 1e-12;

/// Negative probabilities above `-PROBABILITY_TOL` are numerical dust and clip to 0.
pub const PROBABILITY_TOL: f64 = 1e-10;

/// A history: one family index per history time.
pub type HistoryLabel = Vec<usize>;

/// Subsystem projector families together with where they were embedded.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemFamilies {
    pub space: CompositeSpace,
    pub factor: usize,
    pub families: Vec<ProjectorFamily>,
}

/// Schedule, one projector family per history time, and the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySetSpec {
    schedule: Schedule,
    families: Vec<ProjectorFamily>,
    initial_state: DensityOperator,
    subsystem: Option<SubsystemFamilies>,
    cap: usize,
}

impl HistorySetSpec {
    /// Families act on the full space.
    pub fn new(schedule: Schedule, families: Vec<ProjectorFamily>, initial_state: DensityOperator) -> Result<Self> {
        if families.len() != schedule.num_intervals() {
            return Err(Error::DimensionMismatch {
                context: "families per history time",
                expected: schedule.num_intervals(),
                found: families.len(),
            });
        }
        for f in &families {
            if f.dim() != initial_state.dim() {
                return Err(Error::DimensionMismatch {
                    context: "family dimension",
                    expected: initial_state.dim(),
                    found: f.dim(),
                });
            }
        }
        Ok(Self {
            schedule,
            families,
            initial_state,
            subsystem: None,
            cap: DEFAULT_HISTORY_CAP,
        })
    }

    /// Families act on `factor` of the initial state's space and are embedded as `P ⊗ I`.
    pub fn on_subsystem(
        schedule: Schedule,
        families: Vec<ProjectorFamily>,
        factor: usize,
        initial_state: DensityOperator,
    ) -> Result<Self> {
        let space = initial_state.space().clone();
        let embedded = families
            .iter()
            .map(|f| f.embedded(&space, factor))
            .collect::<Result<Vec<_>>>()?;
        let mut spec = Self::new(schedule, embedded, initial_state)?;
        spec.subsystem = Some(SubsystemFamilies {
            space,
            factor,
            families,
        });
        Ok(spec)
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn families(&self) -> &[ProjectorFamily] {
        &self.families
    }

    pub fn initial_state(&self) -> &DensityOperator {
        &self.initial_state
    }

    pub fn subsystem(&self) -> Option<&SubsystemFamilies> {
        self.subsystem.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.initial_state.dim()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Number of histories; errors above the cap.
    pub fn history_count(&self) -> Result<usize> {
        let count = self
            .families
            .iter()
            .try_fold(1usize, |acc, f| acc.checked_mul(f.len()))
            .unwrap_or(usize::MAX);
        if count > self.cap {
            return Err(Error::TooManyHistories {
                count,
                cap: self.cap,
            });
        }
        Ok(count)
    }

    /// Lazy lexicographic enumeration of all histories.
    pub fn histories(&self) -> Result<HistoryIter> {
        self.history_count()?;
        Ok(HistoryIter::new(self.families.iter().map(ProjectorFamily::len).collect()))
    }

    /// `(0,1)`-style index label.
    pub fn index_label(alpha: &[usize]) -> String {
        let parts: Vec<String> = alpha.iter().map(usize::to_string).collect();
        format!("({})", parts.join(","))
    }

    /// Family-label form, e.g. `0/+`.
    pub fn named_label(&self, alpha: &[usize]) -> String {
        alpha
            .iter()
            .zip(&self.families)
            .map(|(&a, f)| f.labels().get(a).map_or("?", String::as_str))
            .collect::<Vec<_>>()
            .join("/")
    }

    fn check_alpha(&self, alpha: &[usize]) -> Result<()> {
        if alpha.len() != self.families.len() {
            return Err(Error::DimensionMismatch {
                context: "history length",
                expected: self.families.len(),
                found: alpha.len(),
            });
        }
        for (&a, f) in alpha.iter().zip(&self.families) {
            if a >= f.len() {
                return Err(Error::IndexOutOfRange {
                    context: "history index",
                    index: a,
                    len: f.len(),
                });
            }
        }
        Ok(())
    }

    fn check_props(&self, props: &PropagatorSet) -> Result<()> {
        if props.len() != self.families.len() {
            return Err(Error::DimensionMismatch {
                context: "propagators per history time",
                expected: self.families.len(),
                found: props.len(),
            });
        }
        if props.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "propagator dimension",
                expected: self.dim(),
                found: props.dim(),
            });
        }
        Ok(())
    }

    /// Heisenberg-picture projectors `P^{(i)}_a(t_i)` for every family.
    fn heisenberg_families(&self, props: &PropagatorSet) -> Result<Vec<Vec<ComplexMatrix>>> {
        self.check_props(props)?;
        let cumulative = props.cumulative();
        Ok(self
            .families
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let u = &cumulative[i + 1];
                let u_dag = u.adjoint();
                f.projectors()
                    .iter()
                    .map(|p| &(&u_dag * p) * u)
                    .collect()
            })
            .collect())
    }
}

/// Odometer over index sequences, last position fastest.
#[derive(Debug, Clone)]
pub struct HistoryIter {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl HistoryIter {
    fn new(sizes: Vec<usize>) -> Self {
        let next = if sizes.iter().all(|&s| s > 0) {
            Some(vec![0; sizes.len()])
        } else {
            None
        };
        Self { sizes, next }
    }
}

impl Iterator for HistoryIter {
    type Item = HistoryLabel;

    fn next(&mut self) -> Option<HistoryLabel> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut pos = succ.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            succ[pos] += 1;
            if succ[pos] < self.sizes[pos] {
                self.next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(current)
    }
}

/// `C_α` together with its index sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassOperator {
    pub alpha: HistoryLabel,
    pub matrix: ComplexMatrix,
}

/// `C_α = P_{α_1}(t_1) ⋯ P_{α_n}(t_n)`.
pub fn class_operator(spec: &HistorySetSpec, props: &PropagatorSet, alpha: &[usize]) -> Result<ClassOperator> {
    spec.check_alpha(alpha)?;
    let heis = spec.heisenberg_families(props)?;
    Ok(ClassOperator {
        alpha: alpha.to_vec(),
        matrix: product_of(&heis, alpha, spec.dim()),
    })
}

fn product_of(heis: &[Vec<ComplexMatrix>], alpha: &[usize], dim: usize) -> ComplexMatrix {
    alpha
        .iter()
        .enumerate()
        .fold(ComplexMatrix::identity(dim), |acc, (i, &a)| &acc * &heis[i][a])
}

/// All class operators in enumeration order.
pub fn class_operators(spec: &HistorySetSpec, props: &PropagatorSet) -> Result<Vec<ClassOperator>> {
    let heis = spec.heisenberg_families(props)?;
    let labels: Vec<HistoryLabel> = spec.histories()?.collect();
    Ok(labels
        .into_par_iter()
        .map(|alpha| {
            let matrix = product_of(&heis, &alpha, spec.dim());
            ClassOperator { alpha, matrix }
        })
        .collect())
}

/// `‖Σ_α C_α − I‖_F`.
pub fn completeness_defect(classes: &[ClassOperator]) -> f64 {
    let Some(first) = classes.first() else {
        return f64::INFINITY;
    };
    let d = first.matrix.rows();
    let mut sum = ComplexMatrix::zeros(d, d);
    for c in classes {
        sum += &c.matrix;
    }
    (&sum - &ComplexMatrix::identity(d)).frobenius_norm()
}

fn clip_probability(p: f64) -> Result<f64> {
    if p < -PROBABILITY_TOL {
        return Err(Error::NegativeProbability { value: p });
    }
    if p < 0.0 {
        log::debug!("clipping probability {p:.3e} to 0");
        return Ok(0.0);
    }
    Ok(p)
}

fn compact_form(rho: &ComplexMatrix, c: &ComplexMatrix) -> f64 {
    ComplexMatrix::trace_adjoint_product(c, &(rho * c)).re
}

/// `p(α) = Tr(C_α† ρ C_α)`.
pub fn history_probability(rho: &DensityOperator, c: &ClassOperator) -> Result<f64> {
    c.matrix.require_dim(rho.dim(), "class operator")?;
    clip_probability(compact_form(rho.matrix(), &c.matrix))
}

/// Probability from the sequential projection rule in the Schrödinger picture:
/// evolve, project, evolve, project, …, then take the trace.
pub fn chain_probability(rho: &DensityOperator, spec: &HistorySetSpec, props: &PropagatorSet, alpha: &[usize]) -> Result<f64> {
    spec.check_alpha(alpha)?;
    spec.check_props(props)?;
    rho.matrix().require_dim(spec.dim(), "initial state")?;
    let mut sigma = rho.matrix().clone();
    for (i, &a) in alpha.iter().enumerate() {
        let u = props.step(i);
        sigma = sigma.conjugate_by(u);
        let p = &spec.families[i].projectors()[a];
        sigma = &(p * &sigma) * p;
    }
    clip_probability(sigma.trace().re)
}

/// Compact-form probability; debug builds also evaluate the chain form and
/// assert agreement within `1e-10`.
pub fn history_probability_checked(
    rho: &DensityOperator,
    spec: &HistorySetSpec,
    props: &PropagatorSet,
    alpha: &[usize],
) -> Result<f64> {
    let c = class_operator(spec, props, alpha)?;
    let p = history_probability(rho, &c)?;
    if cfg!(debug_assertions) {
        let q = chain_probability(rho, spec, props, alpha)?;
        debug_assert!((p - q).abs() <= 1e-10, "compact {p} vs chain {q}");
    }
    Ok(p)
}

/// Probability of the union `α or β` from the summed class operator `C_α + C_β`.
pub fn union_probability(rho: &DensityOperator, a: &ClassOperator, b: &ClassOperator) -> Result<f64> {
    a.matrix.require_dim(rho.dim(), "class operator")?;
    b.matrix.require_dim(rho.dim(), "class operator")?;
    let sum = &a.matrix + &b.matrix;
    clip_probability(compact_form(rho.matrix(), &sum))
}

/// `D(α, β)` for all history pairs, with history labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceMatrix {
    entries: ComplexMatrix,
    labels: Vec<HistoryLabel>,
    names: Vec<String>,
}

impl DecoherenceMatrix {
    pub fn from_parts(entries: ComplexMatrix, labels: Vec<HistoryLabel>, names: Vec<String>) -> Result<Self> {
        let n = entries.require_square("decoherence matrix")?;
        if labels.len() != n || names.len() != n {
            return Err(Error::DimensionMismatch {
                context: "decoherence matrix labels",
                expected: n,
                found: labels.len().min(names.len()),
            });
        }
        Ok(Self {
            entries,
            labels,
            names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn entries(&self) -> &ComplexMatrix {
        &self.entries
    }

    pub fn labels(&self) -> &[HistoryLabel] {
        &self.labels
    }

    /// Family-label names, aligned with [`labels`](Self::labels).
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, alpha: &[usize]) -> Option<usize> {
        self.labels.iter().position(|l| l == alpha)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries.get(i, j)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    /// `Σ_{α,β} D(α, β)`, which equals `Tr ρ`.
    pub fn total_sum(&self) -> C64 {
        self.entries.data().iter().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.entries.hermiticity_defect()
    }

    /// Largest `|D(α,β)| / √(D(α,α) D(β,β))` over non-vacuous pairs.
    pub fn max_normalized_offdiag(&self, p_floor: f64) -> f64 {
        let p = self.probabilities();
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i != j && p[i] >= p_floor && p[j] >= p_floor {
                    worst = worst.max(self.get(i, j).norm() / (p[i] * p[j]).sqrt());
                }
            }
        }
        worst
    }

    /// Max entrywise difference to another matrix over the same histories.
    pub fn max_abs_difference(&self, other: &Self) -> Result<f64> {
        if self.labels != other.labels {
            return Err(Error::InvalidArgument(
                "decoherence matrices index different histories".into(),
            ));
        }
        Ok((&self.entries - &other.entries).max_abs())
    }
}

/// `D(α, β) = Tr(C_α† ρ C_β)` for all pairs.
pub fn decoherence_matrix(rho: &DensityOperator, spec: &HistorySetSpec, props: &PropagatorSet) -> Result<DecoherenceMatrix> {
    rho.matrix().require_dim(spec.dim(), "initial state")?;
    let classes = class_operators(spec, props)?;
    decoherence_from_classes(rho, spec, &classes)
}

/// Decoherence matrix from precomputed class operators.
pub fn decoherence_from_classes(
    rho: &DensityOperator,
    spec: &HistorySetSpec,
    classes: &[ClassOperator],
) -> Result<DecoherenceMatrix> {
    let rho_c: Vec<ComplexMatrix> = classes
        .par_iter()
        .map(|c| rho.matrix() * &c.matrix)
        .collect();
    let n = classes.len();
    let rows: Vec<Vec<C64>> = classes
        .par_iter()
        .map(|ca| {
            rho_c
                .iter()
                .map(|x| ComplexMatrix::trace_adjoint_product(&ca.matrix, x))
                .collect()
        })
        .collect();
    let entries = ComplexMatrix::from_vec(n, n, rows.into_iter().flatten().collect())?;
    let labels: Vec<HistoryLabel> = classes.iter().map(|c| c.alpha.clone()).collect();
    let names = labels.iter().map(|a| spec.named_label(a)).collect();
    DecoherenceMatrix::from_parts(entries, labels, names)
}

/// Interference term `2 Re D(α, β)` for distinct histories.
pub fn interference_term(d: &DecoherenceMatrix, alpha: &[usize], beta: &[usize]) -> Result<f64> {
    if alpha == beta {
        return Err(Error::InvalidArgument(
            "interference term needs two distinct histories".into(),
        ));
    }
    let find = |h: &[usize]| {
        d.index_of(h)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown history {}", HistorySetSpec::index_label(h))))
    };
    let (i, j) = (find(alpha)?, find(beta)?);
    Ok(2.0 * d.get(i, j).re)
}

/// Coarse-grains every family of a history set; `partitions[i]` groups the members
/// of family `i`.
pub fn coarse_grain_histories(spec: &HistorySetSpec, partitions: &[Vec<Vec<usize>>]) -> Result<HistorySetSpec> {
    if partitions.len() != spec.families.len() {
        return Err(Error::DimensionMismatch {
            context: "partitions per history time",
            expected: spec.families.len(),
            found: partitions.len(),
        });
    }
    match &spec.subsystem {
        Some(sub) => {
            let coarse = sub
                .families
                .iter()
                .zip(partitions)
                .map(|(f, p)| coarse_grain_family(f, p))
                .collect::<Result<Vec<_>>>()?;
            HistorySetSpec::on_subsystem(
                spec.schedule.clone(),
                coarse,
                sub.factor,
                spec.initial_state.clone(),
            )
            .map(|s| s.with_cap(spec.cap))
        }
        None => {
            let coarse = spec
                .families
                .iter()
                .zip(partitions)
                .map(|(f, p)| coarse_grain_family(f, p))
                .collect::<Result<Vec<_>>>()?;
            HistorySetSpec::new(spec.schedule.clone(), coarse, spec.initial_state.clone())
                .map(|s| s.with_cap(spec.cap))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoherenceMode {
    /// `Re D(α, β) ≈ 0` for `α ≠ β`.
    Weak,
    /// `D(α, β) ≈ 0` for `α ≠ β`.
    Medium,
}

impl fmt::Display for DecoherenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecoherenceMode::Weak => write!(f, "weak"),
            DecoherenceMode::Medium => write!(f, "medium"),
        }
    }
}

/// A history pair and its defect.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDefect {
    pub alpha: HistoryLabel,
    pub beta: HistoryLabel,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceReport {
    pub mode: DecoherenceMode,
    pub eps: f64,
    pub p_floor: f64,
    pub passes: bool,
    /// Worst non-vacuous pair by normalized defect.
    pub worst: Option<PairDefect>,
    pub max_normalized_defect: f64,
    /// Unordered pairs with at least one diagonal below `p_floor`.
    pub vacuous_pairs: usize,
    pub checked_pairs: usize,
}

/// Tests weak or medium decoherence with the scale-free defect
/// `|Re D(α,β)|` or `|D(α,β)|` divided by `√(D(α,α) D(β,β))`.
pub fn check_decoherence(d: &DecoherenceMatrix, mode: DecoherenceMode, eps: f64, p_floor: f64) -> Result<DecoherenceReport> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let p = d.probabilities();
    let mut worst: Option<PairDefect> = None;
    let mut max_defect: f64 = 0.0;
    let (mut vacuous, mut checked) = (0, 0);
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            if p[i] < p_floor || p[j] < p_floor {
                vacuous += 1;
                continue;
            }
            checked += 1;
            let z = d.get(i, j);
            let raw = match mode {
                DecoherenceMode::Weak => z.re.abs(),
                DecoherenceMode::Medium => z.norm(),
            };
            let defect = raw / (p[i] * p[j]).sqrt();
            if worst.as_ref().is_none_or(|w| defect > w.defect) {
                worst = Some(PairDefect {
                    alpha: d.labels()[i].clone(),
                    beta: d.labels()[j].clone(),
                    defect,
                });
            }
            max_defect = max_defect.max(defect);
        }
    }
    Ok(DecoherenceReport {
        mode,
        eps,
        p_floor,
        passes: max_defect <= eps,
        worst,
        max_normalized_defect: max_defect,
        vacuous_pairs: vacuous,
        checked_pairs: checked,
    })
}

/// Weak and medium reports together; medium passing must imply weak passing.
pub fn check_both(d: &DecoherenceMatrix, eps: f64, p_floor: f64) -> Result<(DecoherenceReport, DecoherenceReport)> {
    let weak = check_decoherence(d, DecoherenceMode::Weak, eps, p_floor)?;
    let medium = check_decoherence(d, DecoherenceMode::Medium, eps, p_floor)?;
    if medium.passes && !weak.passes {
        return Err(Error::InvalidArgument(
            "medium decoherence passed while weak decoherence failed".into(),
        ));
    }
    Ok((weak, medium))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    /// Axiom 1: `min_α p(α)`; Axiom 2: `|Σ p − 1|`; Axiom 3: max additivity defect.
    pub value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KolmogorovReport {
    pub eps: f64,
    pub probabilities: Vec<f64>,
    pub nonnegativity: AxiomCheck,
    pub normalization: AxiomCheck,
    /// Max over pairs of `|p(α or β) − p(α) − p(β)|`; the verdict is the weak
    /// decoherence verdict at the same `ε`.
    pub additivity: AxiomCheck,
    pub worst_additivity_pair: Option<PairDefect>,
    pub weak: DecoherenceReport,
}

impl KolmogorovReport {
    pub fn all_hold(&self) -> bool {
        self.nonnegativity.holds && self.normalization.holds && self.additivity.holds
    }
}

/// Checks the three Kolmogorov axioms on a history set.
pub fn kolmogorov_report(rho: &DensityOperator, spec: &HistorySetSpec, props: &PropagatorSet, eps: f64) -> Result<KolmogorovReport> {
    let classes = class_operators(spec, props)?;
    let d = decoherence_from_classes(rho, spec, &classes)?;
    let probabilities = d.probabilities();
    let min_p = probabilities.iter().copied().fold(f64::INFINITY, f64::min);
    let sum_defect = (probabilities.iter().sum::<f64>() - 1.0).abs();

    // p(α or β) from the summed class operator, independent of D
    let rho_c: Vec<ComplexMatrix> = classes.par_iter().map(|c| rho.matrix() * &c.matrix).collect();
    let n = classes.len();
    let pair_defects: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let classes = &classes;
            let rho_c = &rho_c;
            let probabilities = &probabilities;
            (i + 1..n).map(move |j| {
                let sum = &classes[i].matrix + &classes[j].matrix;
                let x = &rho_c[i] + &rho_c[j];
                let p_union = ComplexMatrix::trace_adjoint_product(&sum, &x).re;
                (i, j, (p_union - probabilities[i] - probabilities[j]).abs())
            })
        })
        .collect();
    let worst = pair_defects
        .iter()
        .copied()
        .fold(None, |acc: Option<(usize, usize, f64)>, cur| match acc {
            Some(a) if a.2 >= cur.2 => Some(a),
            _ => Some(cur),
        });
    let weak = check_decoherence(&d, DecoherenceMode::Weak, eps, DEFAULT_P_FLOOR)?;
    Ok(KolmogorovReport {
        eps,
        nonnegativity: AxiomCheck {
            value: min_p,
            holds: min_p >= -eps,
        },
        normalization: AxiomCheck {
            value: sum_defect,
            holds: sum_defect <= eps,
        },
        additivity: AxiomCheck {
            value: worst.map_or(0.0, |w| w.2),
            holds: weak.passes,
        },
        worst_additivity_pair: worst.map(|(i, j, defect)| PairDefect {
            alpha: classes[i].alpha.clone(),
            beta: classes[j].alpha.clone(),
            defect,
        }),
        probabilities,
        weak,
    })
}
