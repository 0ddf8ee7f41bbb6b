//! Reduced dynamics of a subsystem and the affine decomposition `M = L + K`.
//!
//! Superoperators act on column-stacked operators: `vec(X)[i + d·j] = X[i][j]`.
//! For `d = 2`, `vec([[a, b], [c, e]]) = (a, c, b, e)`, and `X ↦ A X B` has
//! matrix `Bᵀ ⊗ A`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::histories::{DecoherenceMatrix, HistoryLabel, HistorySetSpec, DEFAULT_HISTORY_CAP};
use crate::models::PropagatorSet;
use crate::state::{DensityOperator, ProjectorFamily, ReferenceEnvState, ReferenceKind};
use crate::tensor::{
    entropy_of_eigenvalues, hermitian_spectrum, kron, partial_trace, unitary_exp, ComplexMatrix, CompositeSpace, Split,
    C64, ONE, ZERO,
};
use crate::tol::Tolerances;

/// Tolerance used when checking a stored decomposition against exact reduced evolution.
pub const JSS_TOL: f64 = 1e-10;

/// Rank ties in pointer ranking are resolved at this resolution.
pub const RANK_RESOLUTION: f64 = 1e-9;

fn check_unitary(u: &ComplexMatrix, dim: usize) -> Result<()> {
    u.require_dim(dim, "propagator")?;
    let defect = u.unitarity_defect();
    if defect > Tolerances::default().unitary {
        return Err(Error::NotUnitary { defect });
    }
    Ok(())
}

fn check_reference(split: &Split, reference: &ReferenceEnvState) -> Result<()> {
    if reference.dim() != split.traced_dim() {
        return Err(Error::DimensionMismatch {
            context: "reference environment state",
            expected: split.traced_dim(),
            found: reference.dim(),
        });
    }
    Ok(())
}

/// `Tr_E[U A U†]` for an arbitrary full-space operator.
pub fn reduced_evolve_operator(a: &ComplexMatrix, u: &ComplexMatrix, space: &CompositeSpace, keep: &[usize]) -> Result<ComplexMatrix> {
    let split = space.split(keep)?;
    a.require_dim(space.total_dim(), "full-space operator")?;
    check_unitary(u, space.total_dim())?;
    split.partial_trace(&a.conjugate_by(u))
}

/// `Tr_E[U ρ U†]` as a density operator on the kept factors.
pub fn reduced_evolve(rho: &DensityOperator, u: &ComplexMatrix, keep: &[usize]) -> Result<DensityOperator> {
    let space = rho.space();
    let m = reduced_evolve_operator(rho.matrix(), u, space, keep)?;
    let split = space.split(keep)?;
    let kept = CompositeSpace::new(split.kept_factors().iter().map(|&f| space.factor_dims()[f]).collect())?;
    DensityOperator::new(m.hermitian_part(), kept)
}

/// Linear map on `d × d` operators as a `d² × d²` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    d: usize,
    matrix: ComplexMatrix,
}

fn vec_index(d: usize, i: usize, j: usize) -> usize {
    i + d * j
}

impl Superoperator {
    pub fn from_matrix(d: usize, matrix: ComplexMatrix) -> Result<Self> {
        matrix.require_dim(d * d, "superoperator matrix")?;
        Ok(Self { d, matrix })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d,
            matrix: ComplexMatrix::identity(d * d),
        }
    }

    /// Builds the matrix from the images of the matrix units `E_ij`.
    pub fn from_fn(d: usize, mut f: impl FnMut(&ComplexMatrix) -> Result<ComplexMatrix>) -> Result<Self> {
        let mut matrix = ComplexMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for i in 0..d {
                let mut e = ComplexMatrix::zeros(d, d);
                e[(i, j)] = ONE;
                let image = f(&e)?;
                image.require_dim(d, "superoperator image")?;
                let col = vec_index(d, i, j);
                for q in 0..d {
                    for p in 0..d {
                        matrix[(vec_index(d, p, q), col)] = image.get(p, q);
                    }
                }
            }
        }
        Ok(Self { d, matrix })
    }

    /// `X ↦ U X U†`.
    pub fn conjugation(u: &ComplexMatrix) -> Result<Self> {
        let d = u.require_square("conjugating matrix")?;
        Ok(Self {
            d,
            matrix: kron(&u.adjoint().transpose(), u),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.d;
        x.require_dim(d, "superoperator argument")?;
        let mut v = vec![ZERO; d * d];
        for j in 0..d {
            for i in 0..d {
                v[vec_index(d, i, j)] = x.get(i, j);
            }
        }
        let w = self.matrix.matvec(&v);
        let mut out = ComplexMatrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                out[(i, j)] = w[vec_index(d, i, j)];
            }
        }
        Ok(out)
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Superoperator) -> Result<Self> {
        if first.d != self.d {
            return Err(Error::DimensionMismatch {
                context: "superoperator composition",
                expected: self.d,
                found: first.d,
            });
        }
        Ok(Self {
            d: self.d,
            matrix: &self.matrix * &first.matrix,
        })
    }

    /// Choi matrix `Σ_ij E_ij ⊗ L(E_ij)`.
    pub fn choi(&self) -> ComplexMatrix {
        let d = self.d;
        let mut out = ComplexMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let col = vec_index(d, i, j);
                for k in 0..d {
                    for l in 0..d {
                        out[(i * d + k, j * d + l)] = self.matrix.get(vec_index(d, k, l), col);
                    }
                }
            }
        }
        out
    }

    /// Smallest eigenvalue of the (Hermitian part of the) Choi matrix.
    pub fn choi_min_eigenvalue(&self) -> Result<f64> {
        let spectrum = hermitian_spectrum(&self.choi().hermitian_part())?;
        Ok(spectrum.eigenvalues.last().copied().unwrap_or(0.0))
    }

    /// `max_ij |Tr L(E_ij) − δ_ij|`; zero for a trace-preserving map.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let col = vec_index(d, i, j);
                let tr: C64 = (0..d).map(|k| self.matrix.get(vec_index(d, k, k), col)).sum();
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((tr - target).norm());
            }
        }
        worst
    }

    /// Frobenius distance between the matrix representations.
    pub fn distance(&self, other: &Superoperator) -> Result<f64> {
        if other.d != self.d {
            return Err(Error::DimensionMismatch {
                context: "superoperator distance",
                expected: self.d,
                found: other.d,
            });
        }
        Ok((&self.matrix - &other.matrix).frobenius_norm())
    }
}

/// `L(X) = Tr_E[U (X ⊗ ω) U†]`.
pub fn jss_l(u: &ComplexMatrix, reference: &ReferenceEnvState, space: &CompositeSpace, keep: &[usize]) -> Result<Superoperator> {
    let split = space.split(keep)?;
    check_unitary(u, space.total_dim())?;
    check_reference(&split, reference)?;
    let u_dag = u.adjoint();
    Superoperator::from_fn(split.kept_dim(), |e| {
        let full = split.join(e, reference.matrix())?;
        split.partial_trace(&(&(u * &full) * &u_dag))
    })
}

/// `K = Tr_E[U (A − Tr_E A ⊗ ω) U†]`.
pub fn jss_k(
    u: &ComplexMatrix,
    a: &ComplexMatrix,
    reference: &ReferenceEnvState,
    space: &CompositeSpace,
    keep: &[usize],
) -> Result<ComplexMatrix> {
    let split = space.split(keep)?;
    check_unitary(u, space.total_dim())?;
    check_reference(&split, reference)?;
    a.require_dim(space.total_dim(), "full-space operator")?;
    let correlated = a - &split.join(&split.partial_trace(a)?, reference.matrix())?;
    split.partial_trace(&correlated.conjugate_by(u))
}

/// The pair `(L, K)` for one propagator and one full-space operator `A`.
///
/// `K` belongs to `A`, not to `Tr_E A`; [`jss_apply`] refuses any other operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMap {
    pub l: Superoperator,
    pub k: ComplexMatrix,
    pub reference: ReferenceEnvState,
    pub interval: (f64, f64),
    context: ComplexMatrix,
    space: CompositeSpace,
    keep: Vec<usize>,
}

impl ReducedMap {
    /// Builds `L` and `K` and checks `L(Tr_E A) + K = Tr_E[U A U†]` within `1e-10`
    /// (scaled by `max(1, ‖A‖_F)`).
    pub fn new(
        u: &ComplexMatrix,
        a: &ComplexMatrix,
        reference: ReferenceEnvState,
        space: &CompositeSpace,
        keep: &[usize],
        interval: (f64, f64),
    ) -> Result<Self> {
        let l = jss_l(u, &reference, space, keep)?;
        let k = jss_k(u, a, &reference, space, keep)?;
        let map = Self {
            l,
            k,
            reference,
            interval,
            context: a.clone(),
            space: space.clone(),
            keep: keep.to_vec(),
        };
        let exact = reduced_evolve_operator(a, u, space, keep)?;
        let error = (&map.evaluate()? - &exact).frobenius_norm();
        let allowed = JSS_TOL * a.frobenius_norm().max(1.0);
        if error > allowed {
            return Err(Error::Reconstruction { error, tol: allowed });
        }
        Ok(map)
    }

    pub fn context(&self) -> &ComplexMatrix {
        &self.context
    }

    fn evaluate(&self) -> Result<ComplexMatrix> {
        let reduced = partial_trace(&self.context, &self.space, &self.keep)?;
        Ok(&self.l.apply(&reduced)? + &self.k)
    }
}

/// `L(Tr_E A) + K` for the operator the map was built from.
pub fn jss_apply(map: &ReducedMap, a: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.require_dim(map.context.rows(), "full-space operator")?;
    let diff = (a - &map.context).max_abs();
    if diff > 1e-12 * map.context.max_abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "operator differs from the map's context by {diff:.3e}; K is specific to that operator"
        )));
    }
    map.evaluate()
}

/// Deviation of one branch operator from reduced-state-only evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchDeviation {
    /// Interval index the branch is evolved over.
    pub step: usize,
    pub alpha_prefix: HistoryLabel,
    pub beta_prefix: HistoryLabel,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    pub max_deviation: f64,
    pub branches: Vec<BranchDeviation>,
    pub tol: f64,
    pub factorizable: bool,
    pub reference: ReferenceKind,
}

/// Subsystem projectors, the split and the per-interval unitaries of a history set.
struct SubsystemChain<'a> {
    split: Split,
    keep: Vec<usize>,
    families: &'a [ProjectorFamily],
    embedded: &'a [ProjectorFamily],
}

fn subsystem_chain<'a>(spec: &'a HistorySetSpec, props: &PropagatorSet) -> Result<SubsystemChain<'a>> {
    let sub = spec.subsystem().ok_or_else(|| {
        Error::InvalidFamily("history set has no subsystem families; build it with on_subsystem".into())
    })?;
    if props.len() != spec.families().len() || props.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            context: "propagators for history set",
            expected: spec.families().len(),
            found: props.len(),
        });
    }
    spec.history_count()?;
    let keep = vec![sub.factor];
    Ok(SubsystemChain {
        split: sub.space.split(&keep)?,
        keep,
        families: &sub.families,
        embedded: spec.families(),
    })
}

/// Depth-first walk over branch pairs `(α prefix, β prefix)`.
///
/// `evolve(step, A)` advances a branch over interval `step`; `project(step, a, b, A)`
/// applies `P_a · A · P_b`. `visit` sees every branch before it is evolved.
/// Returns `(α, β, Tr A_n)` for the complete histories.
fn walk_branches<E, P, V>(a0: &ComplexMatrix, sizes: &[usize], evolve: &E, project: &P, visit: &V) -> Result<Vec<(HistoryLabel, HistoryLabel, C64)>>
where
    E: Fn(usize, &ComplexMatrix) -> Result<ComplexMatrix> + Sync,
    P: Fn(usize, usize, usize, &ComplexMatrix) -> ComplexMatrix + Sync,
    V: Fn(usize, &[usize], &[usize], &ComplexMatrix) -> Result<()> + Sync,
{
    #[allow(clippy::too_many_arguments)]
    fn recurse<E, P, V>(
        depth: usize,
        a: &ComplexMatrix,
        alpha: &mut Vec<usize>,
        beta: &mut Vec<usize>,
        sizes: &[usize],
        evolve: &E,
        project: &P,
        visit: &V,
        out: &mut Vec<(HistoryLabel, HistoryLabel, C64)>,
    ) -> Result<()>
    where
        E: Fn(usize, &ComplexMatrix) -> Result<ComplexMatrix>,
        P: Fn(usize, usize, usize, &ComplexMatrix) -> ComplexMatrix,
        V: Fn(usize, &[usize], &[usize], &ComplexMatrix) -> Result<()>,
    {
        if depth == sizes.len() {
            out.push((alpha.clone(), beta.clone(), a.trace()));
            return Ok(());
        }
        visit(depth, alpha, beta, a)?;
        let evolved = evolve(depth, a)?;
        for x in 0..sizes[depth] {
            for y in 0..sizes[depth] {
                let next = project(depth, x, y, &evolved);
                alpha.push(x);
                beta.push(y);
                recurse(depth + 1, &next, alpha, beta, sizes, evolve, project, visit, out)?;
                alpha.pop();
                beta.pop();
            }
        }
        Ok(())
    }

    if sizes.is_empty() {
        return Ok(vec![(vec![], vec![], a0.trace())]);
    }
    visit(0, &[], &[], a0)?;
    let evolved = evolve(0, a0)?;
    let first: Vec<(usize, usize)> = (0..sizes[0]).flat_map(|x| (0..sizes[0]).map(move |y| (x, y))).collect();
    let parts: Vec<Vec<(HistoryLabel, HistoryLabel, C64)>> = first
        .into_par_iter()
        .map(|(x, y)| {
            let mut out = Vec::new();
            let next = project(0, x, y, &evolved);
            recurse(1, &next, &mut vec![x], &mut vec![y], sizes, evolve, project, visit, &mut out)?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn mixed_radix(alpha: &[usize], sizes: &[usize]) -> usize {
    alpha.iter().zip(sizes).fold(0, |acc, (&a, &s)| acc * s + a)
}

fn all_labels(sizes: &[usize]) -> Vec<HistoryLabel> {
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|mut k| {
            let mut alpha = vec![0; sizes.len()];
            for (pos, &s) in sizes.iter().enumerate().rev() {
                alpha[pos] = k % s;
                k /= s;
            }
            alpha
        })
        .collect()
}

fn assemble(
    leaves: Vec<(HistoryLabel, HistoryLabel, C64)>,
    sizes: &[usize],
    families: &[ProjectorFamily],
) -> Result<DecoherenceMatrix> {
    let labels = all_labels(sizes);
    let n = labels.len();
    let mut entries = ComplexMatrix::zeros(n, n);
    for (alpha, beta, value) in leaves {
        entries[(mixed_radix(&alpha, sizes), mixed_radix(&beta, sizes))] = value;
    }
    let names = labels
        .iter()
        .map(|alpha| {
            alpha
                .iter()
                .zip(families)
                .map(|(&a, f)| f.labels()[a].as_str())
                .collect::<Vec<_>>()
                .join("/")
        })
        .collect();
    DecoherenceMatrix::from_parts(entries, labels, names)
}

fn check_history_cap(sizes: &[usize]) -> Result<()> {
    let count = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s)).unwrap_or(usize::MAX);
    if count > DEFAULT_HISTORY_CAP {
        return Err(Error::TooManyHistories {
            count,
            cap: DEFAULT_HISTORY_CAP,
        });
    }
    Ok(())
}

/// For every branch operator `A` of the subsystem chain, `‖Tr_E[U A U†] − L(Tr_E A)‖_F`.
pub fn paz_zurek_test(
    spec: &HistorySetSpec,
    props: &PropagatorSet,
    reference: &ReferenceEnvState,
    tol: f64,
) -> Result<FactorizationReport> {
    let chain = subsystem_chain(spec, props)?;
    check_reference(&chain.split, reference)?;
    let sub = spec.subsystem().expect("checked by subsystem_chain");
    let l_maps = props
        .steps()
        .iter()
        .map(|u| jss_l(u, reference, &sub.space, &chain.keep))
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<usize> = chain.embedded.iter().map(ProjectorFamily::len).collect();
    let branches = std::sync::Mutex::new(Vec::new());
    let split = &chain.split;
    walk_branches(
        spec.initial_state().matrix(),
        &sizes,
        &|step, a| Ok(a.conjugate_by(props.step(step))),
        &|step, x, y, a| {
            let f = &chain.embedded[step];
            &(&f.projectors()[x] * a) * &f.projectors()[y]
        },
        &|step, alpha, beta, a| {
            let exact = split.partial_trace(&a.conjugate_by(props.step(step)))?;
            let factored = l_maps[step].apply(&split.partial_trace(a)?)?;
            let deviation = (&exact - &factored).frobenius_norm();
            branches.lock().expect("branch list lock").push(BranchDeviation {
                step,
                alpha_prefix: alpha.to_vec(),
                beta_prefix: beta.to_vec(),
                deviation,
            });
            Ok(())
        },
    )?;
    let mut branches = branches.into_inner().expect("branch list lock");
    branches.sort_by(|a, b| {
        (a.step, &a.alpha_prefix, &a.beta_prefix).cmp(&(b.step, &b.alpha_prefix, &b.beta_prefix))
    });
    let max_deviation = branches.iter().map(|b| b.deviation).fold(0.0, f64::max);
    Ok(FactorizationReport {
        max_deviation,
        branches,
        tol,
        factorizable: max_deviation <= tol,
        reference: reference.kind(),
    })
}

/// Exact subsystem decoherence functional, evaluated along the Schrödinger chain
/// `Tr[P_{α_n} U_n ⋯ P_{α_1} U_1 ρ U_1† P_{β_1} ⋯ U_n† P_{β_n}]`.
pub fn subsystem_d_exact(rho: &DensityOperator, spec: &HistorySetSpec, props: &PropagatorSet) -> Result<DecoherenceMatrix> {
    let chain = subsystem_chain(spec, props)?;
    rho.matrix().require_dim(spec.dim(), "initial state")?;
    let sizes: Vec<usize> = chain.embedded.iter().map(ProjectorFamily::len).collect();
    let leaves = walk_branches(
        rho.matrix(),
        &sizes,
        &|step, a| Ok(a.conjugate_by(props.step(step))),
        &|step, x, y, a| {
            let f = &chain.embedded[step];
            &(&f.projectors()[x] * a) * &f.projectors()[y]
        },
        &|_, _, _, _| Ok(()),
    )?;
    assemble(leaves, &sizes, chain.families)
}

/// Factored functional `Tr_S[P_{α_n} L_n{⋯ P_{α_1} L_1{ρ_S} P_{β_1} ⋯} P_{β_n}]`.
pub fn subsystem_d_factored(rho_s: &ComplexMatrix, l_maps: &[Superoperator], families: &[ProjectorFamily]) -> Result<DecoherenceMatrix> {
    if l_maps.len() != families.len() {
        return Err(Error::DimensionMismatch {
            context: "linear maps per interval",
            expected: families.len(),
            found: l_maps.len(),
        });
    }
    let d = rho_s.require_square("reduced initial state")?;
    for (l, f) in l_maps.iter().zip(families) {
        if l.dim() != d || f.dim() != d {
            return Err(Error::DimensionMismatch {
                context: "subsystem dimension",
                expected: d,
                found: if l.dim() != d { l.dim() } else { f.dim() },
            });
        }
    }
    let sizes: Vec<usize> = families.iter().map(ProjectorFamily::len).collect();
    check_history_cap(&sizes)?;
    let leaves = walk_branches(
        rho_s,
        &sizes,
        &|step, a| l_maps[step].apply(a),
        &|step, x, y, a| {
            let f = &families[step];
            &(&f.projectors()[x] * a) * &f.projectors()[y]
        },
        &|_, _, _, _| Ok(()),
    )?;
    assemble(leaves, &sizes, families)
}

/// `L` for one interval, with the reference it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedChannel {
    pub l: Superoperator,
    pub reference: ReferenceEnvState,
    pub interval: (f64, f64),
}

impl TimedChannel {
    pub fn new(l: Superoperator, reference: ReferenceEnvState, interval: (f64, f64)) -> Self {
        Self { l, reference, interval }
    }

    /// `L` of `exp(−iH(t1 − t0))`.
    pub fn from_hamiltonian(
        h: &ComplexMatrix,
        space: &CompositeSpace,
        keep: &[usize],
        reference: &ReferenceEnvState,
        interval: (f64, f64),
    ) -> Result<Self> {
        let u = unitary_exp(h, interval.1 - interval.0)?;
        Ok(Self {
            l: jss_l(&u, reference, space, keep)?,
            reference: reference.clone(),
            interval,
        })
    }
}

/// `‖L(t0→t2) − L(t1→t2)∘L(t0→t1)‖_F`.
pub fn semigroup_deviation(first: &TimedChannel, second: &TimedChannel, total: &TimedChannel) -> Result<f64> {
    if !first.reference.same_as(&second.reference) || !first.reference.same_as(&total.reference) {
        return Err(Error::InvalidArgument(
            "semigroup comparison needs one reference state for all three maps".into(),
        ));
    }
    let (a, b, c) = (first.interval, second.interval, total.interval);
    if a.1 != b.0 || a.0 != c.0 || b.1 != c.1 {
        return Err(Error::InvalidArgument(format!(
            "intervals {a:?} then {b:?} do not compose to {c:?}"
        )));
    }
    total.l.distance(&second.l.after(&first.l)?)
}

/// A labelled orthonormal basis of the subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBasis {
    pub label: String,
    pub vectors: Vec<Vec<C64>>,
}

impl CandidateBasis {
    pub fn new(label: impl Into<String>, vectors: Vec<Vec<C64>>) -> Self {
        Self {
            label: label.into(),
            vectors,
        }
    }

    fn unitary(&self, d: usize) -> Result<ComplexMatrix> {
        if self.vectors.len() != d {
            return Err(Error::DimensionMismatch {
                context: "candidate basis size",
                expected: d,
                found: self.vectors.len(),
            });
        }
        let v = ComplexMatrix::from_columns(&self.vectors)?;
        v.require_dim(d, "candidate basis vectors")?;
        let defect = v.unitarity_defect();
        if defect > 1e-9 {
            return Err(Error::InvalidFamily(format!(
                "candidate basis '{}' is not orthonormal (defect {defect:.3e})",
                self.label
            )));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointerScore {
    pub label: String,
    /// Mean of `‖offdiag ρ_S(t)‖ / ‖offdiag ρ_S(0)‖`; `None` when no initial state
    /// has coherence above the floor in this basis.
    pub persistence: Option<f64>,
    /// Mean of `‖diag ρ_S(t) − diag ρ_S(0)‖`.
    pub drift: f64,
    /// Initial states that contributed to `persistence`.
    pub valid_states: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointerReport {
    /// Best first.
    pub ranking: Vec<PointerScore>,
    pub p_floor: f64,
    /// Every basis kept its coherence; the dynamics does not decohere.
    pub no_decoherence: bool,
}

fn offdiag_norm(r: &ComplexMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..r.rows() {
        for j in 0..r.cols() {
            if i != j {
                s += r.get(i, j).norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn diag_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (0..a.rows()).map(|i| (a.get(i, i) - b.get(i, i)).norm_sqr()).sum::<f64>().sqrt()
}

/// Ranks candidate pointer bases of the subsystem `keep`.
///
/// `grid` holds `(t, U(0→t))`. Both metrics are averaged over grid points and
/// initial states. Order: persistence, then drift (both compared at
/// [`RANK_RESOLUTION`]), then label; bases without a valid initial state go last.
pub fn pointer_ranking(
    grid: &[(f64, ComplexMatrix)],
    space: &CompositeSpace,
    keep: &[usize],
    candidates: &[CandidateBasis],
    initial_states: &[DensityOperator],
    p_floor: f64,
) -> Result<PointerReport> {
    if candidates.len() < 2 {
        return Err(Error::InvalidArgument("pointer ranking needs at least two candidate bases".into()));
    }
    if initial_states.is_empty() || grid.is_empty() {
        return Err(Error::InvalidArgument(
            "pointer ranking needs at least one initial state and one grid time".into(),
        ));
    }
    let split = space.split(keep)?;
    for (_, u) in grid {
        check_unitary(u, space.total_dim())?;
    }
    // ρ_S(0) and ρ_S(t) per initial state, shared by all candidates
    let trajectories: Vec<(ComplexMatrix, Vec<ComplexMatrix>)> = initial_states
        .par_iter()
        .map(|rho| {
            rho.matrix().require_dim(space.total_dim(), "initial state")?;
            let r0 = split.partial_trace(rho.matrix())?;
            let rt = grid
                .iter()
                .map(|(_, u)| split.partial_trace(&rho.matrix().conjugate_by(u)))
                .collect::<Result<Vec<_>>>()?;
            Ok((r0, rt))
        })
        .collect::<Result<_>>()?;

    let mut scores = Vec::with_capacity(candidates.len());
    for basis in candidates {
        let v = basis.unitary(split.kept_dim())?;
        let v_dag = v.adjoint();
        let (mut persistence_sum, mut drift_sum, mut valid) = (0.0, 0.0, 0usize);
        for (r0, rt) in &trajectories {
            let b0 = &(&v_dag * r0) * &v;
            let denom = offdiag_norm(&b0);
            let mut p = 0.0;
            let mut drift = 0.0;
            for r in rt {
                let b = &(&v_dag * r) * &v;
                p += offdiag_norm(&b);
                drift += diag_distance(&b, &b0);
            }
            drift_sum += drift / rt.len() as f64;
            if denom >= p_floor {
                persistence_sum += p / rt.len() as f64 / denom;
                valid += 1;
            }
        }
        scores.push(PointerScore {
            label: basis.label.clone(),
            persistence: (valid > 0).then(|| persistence_sum / valid as f64),
            drift: drift_sum / trajectories.len() as f64,
            valid_states: valid,
        });
    }
    if scores.iter().all(|s| s.persistence.is_none()) {
        return Err(Error::InvalidArgument(
            "no initial state has coherence above the floor in any candidate basis".into(),
        ));
    }
    let bucket = |x: f64| (x / RANK_RESOLUTION).round() as i64;
    scores.sort_by(|a, b| {
        let key = |s: &PointerScore| (s.persistence.is_none(), s.persistence.map_or(0, bucket), bucket(s.drift));
        key(a).cmp(&key(b)).then_with(|| a.label.cmp(&b.label))
    });
    let no_decoherence = scores
        .iter()
        .all(|s| s.persistence.is_none_or(|p| p >= 1.0 - RANK_RESOLUTION));
    Ok(PointerReport {
        ranking: scores,
        p_floor,
        no_decoherence,
    })
}

/// Mutual information `I(S:F)` averaged over random fragments of one size.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyPoint {
    pub fragment_size: usize,
    pub mean_bits: f64,
    pub min_bits: f64,
    pub max_bits: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyProfile {
    pub system_entropy: f64,
    pub points: Vec<RedundancyPoint>,
}

fn entropy_bits(m: &ComplexMatrix) -> Result<f64> {
    let tol = Tolerances::default();
    let spectrum = hermitian_spectrum(&m.hermitian_part())?;
    entropy_of_eigenvalues(&spectrum.eigenvalues, tol.psd)
}

/// `I(S:F) = S(ρ_S) + S(ρ_F) − S(ρ_SF)` in bits.
pub fn mutual_information(rho: &DensityOperator, system: usize, fragment: &[usize]) -> Result<f64> {
    let space = rho.space();
    if fragment.is_empty() {
        return Ok(0.0);
    }
    let s_s = entropy_bits(&partial_trace(rho.matrix(), space, &[system])?)?;
    let s_f = entropy_bits(&partial_trace(rho.matrix(), space, fragment)?)?;
    let mut joint = fragment.to_vec();
    joint.push(system);
    let s_sf = entropy_bits(&partial_trace(rho.matrix(), space, &joint)?)?;
    Ok(s_s + s_f - s_sf)
}

/// Mean `I(S:F)` over `n_samples` seeded random fragments for each fragment size.
pub fn redundancy_profile(
    rho: &DensityOperator,
    system: usize,
    fragment_sizes: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<RedundancyProfile> {
    let space = rho.space();
    let n = space.num_factors();
    if system >= n {
        return Err(Error::IndexOutOfRange {
            context: "system factor",
            index: system,
            len: n,
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("redundancy profile needs at least one sample".into()));
    }
    let env: Vec<usize> = (0..n).filter(|&f| f != system).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::new();
    for &f in fragment_sizes {
        if f > env.len() {
            return Err(Error::InvalidArgument(format!(
                "fragment size {f} exceeds the {} environment factors",
                env.len()
            )));
        }
        for _ in 0..n_samples {
            let mut fragment: Vec<usize> = sample(&mut rng, env.len(), f).into_iter().map(|i| env[i]).collect();
            fragment.sort_unstable();
            jobs.push((f, fragment));
        }
    }
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|(_, fragment)| mutual_information(rho, system, fragment))
        .collect::<Result<_>>()?;
    let points = fragment_sizes
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let chunk = &values[k * n_samples..(k + 1) * n_samples];
            RedundancyPoint {
                fragment_size: f,
                mean_bits: chunk.iter().sum::<f64>() / n_samples as f64,
                min_bits: chunk.iter().copied().fold(f64::INFINITY, f64::min),
                max_bits: chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                samples: n_samples,
            }
        })
        .collect();
    Ok(RedundancyProfile {
        system_entropy: entropy_bits(&partial_trace(rho.matrix(), space, &[system])?)?,
        points,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use super::*;
    use crate::histories::{decoherence_matrix, DEFAULT_P_FLOOR};
    use crate::models::{central_spin_dephasing, perfect_recorder, recorder_with_mode, Dynamics, RecorderMode, Schedule};
    use crate::state::pure_density;
    use crate::tensor::{pauli, random_density, random_unitary};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn plus() -> Vec<C64> {
        vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]
    }

    fn qubit_pair() -> CompositeSpace {
        CompositeSpace::qubits(2).unwrap()
    }

    fn cnot_env_controls_system() -> ComplexMatrix {
        // |s e⟩ → |s⊕e, e⟩
        let mut u = ComplexMatrix::zeros(4, 4);
        for s in 0..2 {
            for e in 0..2 {
                u[(((s ^ e) << 1) | e, (s << 1) | e)] = ONE;
            }
        }
        u
    }

    fn bell() -> DensityOperator {
        let psi = vec![c(FRAC_1_SQRT_2), ZERO, ZERO, c(FRAC_1_SQRT_2)];
        crate::state::pure_density_on(&psi, qubit_pair()).unwrap()
    }

    #[test]
    fn vectorization_worked_example() {
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = Superoperator::conjugation(&pauli::x()).unwrap();
        let y = s.apply(&a).unwrap();
        assert_eq!(y, ComplexMatrix::from_real(2, 2, &[4.0, 3.0, 2.0, 1.0]).unwrap());
        let direct = Superoperator::from_fn(2, |x| Ok(x.conjugate_by(&pauli::x()))).unwrap();
        assert!(direct.distance(&s).unwrap() < 1e-15);
    }

    #[test]
    fn reduced_evolve_examples() {
        let rho = DensityOperator::new(random_density(4, 1), qubit_pair()).unwrap();
        let id = reduced_evolve(&rho, &ComplexMatrix::identity(4), &[0]).unwrap();
        assert!((id.matrix() - &partial_trace(rho.matrix(), rho.space(), &[0]).unwrap()).max_abs() < 1e-15);

        let (us, ue) = (random_unitary(2, 2), random_unitary(2, 3));
        let out = reduced_evolve(&rho, &kron(&us, &ue), &[0]).unwrap();
        let expected = partial_trace(rho.matrix(), rho.space(), &[0]).unwrap().conjugate_by(&us);
        assert!((out.matrix() - &expected).max_abs() < 1e-12);

        let rec = perfect_recorder(1).unwrap();
        let full = rec.initial_state(&pure_density(&plus()).unwrap()).unwrap();
        let out = reduced_evolve(&full, &rec.step(0).unwrap(), &[0]).unwrap();
        assert!((out.matrix() - &ComplexMatrix::identity(2).scale_real(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn l_examples() {
        let space = qubit_pair();
        let omega = ReferenceEnvState::complete_ignorance(2);
        let l = jss_l(&ComplexMatrix::identity(4), &omega, &space, &[0]).unwrap();
        assert!(l.distance(&Superoperator::identity(2)).unwrap() < 1e-15);

        let us = random_unitary(2, 5);
        let thermal = ReferenceEnvState::thermal(&pauli::z(), 1.0).unwrap();
        let l = jss_l(&kron(&us, &random_unitary(2, 6)), &thermal, &space, &[0]).unwrap();
        assert!(l.distance(&Superoperator::conjugation(&us).unwrap()).unwrap() < 1e-12);

        let rec = perfect_recorder(1).unwrap();
        let l = jss_l(&rec.step(0).unwrap(), &omega, &space, &[0]).unwrap();
        let x = ComplexMatrix::from_real(2, 2, &[0.3, 0.4, 0.4, 0.7]).unwrap();
        assert!((&l.apply(&x).unwrap() - &ComplexMatrix::real_diag(&[0.3, 0.7])).max_abs() < 1e-15);
        assert!(l.trace_preservation_defect() < 1e-15);
        assert!(l.choi_min_eigenvalue().unwrap() >= -1e-12);
    }

    #[test]
    fn k_examples() {
        let space = qubit_pair();
        let omega = ReferenceEnvState::complete_ignorance(2);
        let rho_s = random_density(2, 9);
        let product = kron(&rho_s, omega.matrix());
        let u = random_unitary(4, 10);
        assert!(jss_k(&u, &product, &omega, &space, &[0]).unwrap().max_abs() < 1e-15);

        let a = random_density(4, 11);
        let local = kron(&random_unitary(2, 12), &random_unitary(2, 13));
        assert!(jss_k(&local, &a, &omega, &space, &[0]).unwrap().max_abs() < 1e-12);

        let bell = bell();
        let k_id = jss_k(&ComplexMatrix::identity(4), bell.matrix(), &omega, &space, &[0]).unwrap();
        assert!(k_id.max_abs() < 1e-15);

        let rec = perfect_recorder(1).unwrap();
        let step = rec.step(0).unwrap();
        let k = jss_k(&step, bell.matrix(), &omega, &space, &[0]).unwrap();
        let l = jss_l(&step, &omega, &space, &[0]).unwrap();
        let exact = reduced_evolve_operator(bell.matrix(), &step, &space, &[0]).unwrap();
        let via_l = l.apply(&partial_trace(bell.matrix(), &space, &[0]).unwrap()).unwrap();
        assert!((&k - &(&exact - &via_l)).max_abs() < 1e-15);
        assert!(k.trace().norm() < 1e-15);
        assert!(k.max_abs() > 0.1);
    }

    #[test]
    fn apply_checks_context() {
        let space = CompositeSpace::new(vec![2, 3]).unwrap();
        let u = random_unitary(6, 20);
        let a = random_density(6, 21);
        let omega = ReferenceEnvState::complete_ignorance(3);
        let map = ReducedMap::new(&u, &a, omega, &space, &[0], (0.0, 1.0)).unwrap();
        let exact = reduced_evolve_operator(&a, &u, &space, &[0]).unwrap();
        assert!((&jss_apply(&map, &a).unwrap() - &exact).max_abs() < 1e-10);
        assert!(jss_apply(&map, &random_density(6, 22)).is_err());
    }

    #[test]
    fn paz_zurek_counterexample() {
        let bell = bell();
        let schedule = Schedule::new(vec![0.0, 1.0]).unwrap();
        let props = PropagatorSet::from_steps(&schedule, vec![cnot_env_controls_system()]).unwrap();
        let spec =
            HistorySetSpec::on_subsystem(schedule, vec![ProjectorFamily::computational(2)], 0, bell.clone()).unwrap();
        let omega = ReferenceEnvState::complete_ignorance(2);
        let report = paz_zurek_test(&spec, &props, &omega, 1e-10).unwrap();
        assert!(!report.factorizable);
        assert!(report.max_deviation > 0.1);
        assert_eq!(report.branches.len(), 1);

        let exact = subsystem_d_exact(&bell, &spec, &props).unwrap();
        let l = jss_l(props.step(0), &omega, &qubit_pair(), &[0]).unwrap();
        let rho_s = partial_trace(bell.matrix(), &qubit_pair(), &[0]).unwrap();
        let sub = spec.subsystem().unwrap();
        let factored = subsystem_d_factored(&rho_s, &[l], &sub.families).unwrap();
        assert!(exact.max_abs_difference(&factored).unwrap() > 1e-3);
    }

    #[test]
    fn fresh_recorder_factorizes() {
        let rec = recorder_with_mode(2, RecorderMode::FreshPerStep).unwrap();
        let rho = rec.initial_state(&pure_density(&plus()).unwrap()).unwrap();
        let schedule = Schedule::uniform(0.0, 1.0, 2).unwrap();
        let props = rec.propagators(&schedule).unwrap();
        let spec =
            HistorySetSpec::on_subsystem(schedule, vec![ProjectorFamily::computational(2); 2], 0, rho.clone()).unwrap();
        let omega = ReferenceEnvState::complete_ignorance(4);
        let report = paz_zurek_test(&spec, &props, &omega, 1e-10).unwrap();
        assert!(report.factorizable, "max deviation {}", report.max_deviation);

        let exact = subsystem_d_exact(&rho, &spec, &props).unwrap();
        let via_histories = decoherence_matrix(&rho, &spec, &props).unwrap();
        assert!(exact.max_abs_difference(&via_histories).unwrap() <= 1e-12);

        let space = rho.space().clone();
        let l_maps: Vec<_> = props.steps().iter().map(|u| jss_l(u, &omega, &space, &[0]).unwrap()).collect();
        let rho_s = partial_trace(rho.matrix(), &space, &[0]).unwrap();
        let factored = subsystem_d_factored(&rho_s, &l_maps, &spec.subsystem().unwrap().families).unwrap();
        assert!(exact.max_abs_difference(&factored).unwrap() <= 1e-10);
        assert!(factored.max_normalized_offdiag(DEFAULT_P_FLOOR) <= 1e-12);
    }

    #[test]
    fn factored_needs_one_map_per_interval() {
        let fam = vec![ProjectorFamily::computational(2); 2];
        assert!(subsystem_d_factored(&random_density(2, 1), &[Superoperator::identity(2)], &fam).is_err());
    }

    #[test]
    fn single_time_exact_d_is_projected_marginal() {
        let rho = DensityOperator::new(random_density(4, 30), qubit_pair()).unwrap();
        let u = random_unitary(4, 31);
        let schedule = Schedule::new(vec![0.0, 1.0]).unwrap();
        let props = PropagatorSet::from_steps(&schedule, vec![u.clone()]).unwrap();
        let family = ProjectorFamily::qubit_x();
        let spec = HistorySetSpec::on_subsystem(schedule, vec![family.clone()], 0, rho.clone()).unwrap();
        let d = subsystem_d_exact(&rho, &spec, &props).unwrap();
        let marginal = reduced_evolve_operator(rho.matrix(), &u, rho.space(), &[0]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let expected = (&(&family.projectors()[a] * &marginal) * &family.projectors()[b]).trace();
                assert!((d.get(a, b) - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn semigroup_cases() {
        let space = qubit_pair();
        let omega = ReferenceEnvState::complete_ignorance(2);
        let h_local = &kron(&pauli::x(), &ComplexMatrix::identity(2)) + &kron(&ComplexMatrix::identity(2), &pauli::z());
        let ch = |h: &ComplexMatrix, a: f64, b: f64| TimedChannel::from_hamiltonian(h, &space, &[0], &omega, (a, b)).unwrap();
        let dev = semigroup_deviation(&ch(&h_local, 0.0, 0.4), &ch(&h_local, 0.4, 0.8), &ch(&h_local, 0.0, 0.8)).unwrap();
        assert!(dev <= 1e-10);

        let model = central_spin_dephasing(1, &[0.7]).unwrap();
        let h = model.hamiltonian();
        let dev = semigroup_deviation(&ch(h, 0.0, 0.5), &ch(h, 0.5, 1.0), &ch(h, 0.0, 1.0)).unwrap();
        assert!(dev > 1e-3);
        let zero = semigroup_deviation(&ch(h, 0.0, 0.0), &ch(h, 0.0, 0.0), &ch(h, 0.0, 0.0)).unwrap();
        assert_eq!(zero, 0.0);

        let mut other = ch(h, 0.5, 1.0);
        other.reference = ReferenceEnvState::thermal(&pauli::z(), 1.0).unwrap();
        assert!(semigroup_deviation(&ch(h, 0.0, 0.5), &other, &ch(h, 0.0, 1.0)).is_err());
        assert!(semigroup_deviation(&ch(h, 0.0, 0.5), &ch(h, 0.6, 1.0), &ch(h, 0.0, 1.0)).is_err());
    }

    fn z_and_x() -> Vec<CandidateBasis> {
        vec![
            CandidateBasis::new("z", vec![vec![ONE, ZERO], vec![ZERO, ONE]]),
            CandidateBasis::new("x", vec![plus(), vec![c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2)]]),
        ]
    }

    #[test]
    fn recorder_pointer_basis_is_z() {
        let rec = perfect_recorder(1).unwrap();
        let rho = rec.initial_state(&pure_density(&plus()).unwrap()).unwrap();
        let grid = vec![(1.0, rec.step(0).unwrap())];
        let report = pointer_ranking(&grid, rec.space(), &[0], &z_and_x(), &[rho], DEFAULT_P_FLOOR).unwrap();
        assert_eq!(report.ranking[0].label, "z");
        assert_eq!(report.ranking[0].persistence, Some(0.0));
        assert!(!report.no_decoherence);
    }

    #[test]
    fn decoupled_candidates_tie() {
        let model = central_spin_dephasing(1, &[0.0]).unwrap();
        let grid = model.evolution_grid(&[0.5, 1.0]).unwrap();
        let plus_i = vec![c(FRAC_1_SQRT_2), C64::new(0.0, FRAC_1_SQRT_2)];
        let bath = plus();
        let states: Vec<_> = [plus_i]
            .iter()
            .map(|s| {
                crate::state::pure_density_on(&crate::tensor::kron_vec(s, &bath), model.space().clone()).unwrap()
            })
            .collect();
        let report = pointer_ranking(&grid, model.space(), &[0], &z_and_x(), &states, DEFAULT_P_FLOOR).unwrap();
        assert!(report.no_decoherence);
        for s in &report.ranking {
            assert!((s.persistence.unwrap() - 1.0).abs() < 1e-12);
        }
        // ties fall back to label order
        assert_eq!(report.ranking[0].label, "x");
    }

    #[test]
    fn pointer_needs_some_coherence() {
        let rec = perfect_recorder(1).unwrap();
        let rho = rec.initial_state(&pure_density(&[ONE, ZERO]).unwrap()).unwrap();
        let grid = vec![(1.0, rec.step(0).unwrap())];
        let only_z = vec![z_and_x()[0].clone(), CandidateBasis::new("z2", vec![vec![ZERO, ONE], vec![ONE, ZERO]])];
        assert!(pointer_ranking(&grid, rec.space(), &[0], &only_z, &[rho], DEFAULT_P_FLOOR).is_err());
    }

    #[test]
    fn redundancy_examples() {
        let n = 4;
        let mut psi = vec![ZERO; 1 << (n + 1)];
        psi[0] = c(FRAC_1_SQRT_2);
        psi[(1 << (n + 1)) - 1] = c(FRAC_1_SQRT_2);
        let ghz = crate::state::pure_density_on(&psi, CompositeSpace::qubits(n + 1).unwrap()).unwrap();
        let profile = redundancy_profile(&ghz, 0, &[1, 2, 3, 4], 3, 7).unwrap();
        for (k, p) in profile.points.iter().enumerate() {
            let expected = if k + 1 == n { 2.0 } else { 1.0 };
            assert!((p.mean_bits - expected).abs() < 1e-9, "f={} got {}", p.fragment_size, p.mean_bits);
        }

        let product = DensityOperator::product(&[
            &DensityOperator::single(random_density(2, 1)).unwrap(),
            &DensityOperator::single(random_density(2, 2)).unwrap(),
            &DensityOperator::single(random_density(2, 3)).unwrap(),
        ])
        .unwrap();
        let profile = redundancy_profile(&product, 0, &[1, 2], 4, 1).unwrap();
        assert!(profile.points.iter().all(|p| p.mean_bits.abs() < 1e-9));
        assert!(redundancy_profile(&product, 0, &[3], 1, 1).is_err());
    }
}
