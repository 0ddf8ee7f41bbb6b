//! Desk-scale model catalog, schedules and propagators between history times.
//!
//! Hamiltonian models are time independent (`ħ = 1`) and each schedule
//! interval uses one exponential. Prescribed-unitary models (the perfect
//! recorder and the third-party two-slit setup) apply one fixed unitary per
//! schedule interval regardless of its duration, which keeps their
//! decoherence exact.

use std::fmt;

use crate::error::{Error, Result};
use crate::state::DensityOperator;
use crate::tensor::{
    hermitian_spectrum, kron, kron_all, pauli, ComplexMatrix, CompositeSpace, Spectrum, C64, ONE, ZERO,
};
use crate::tol::Tolerances;

/// Largest full-space dimension the model builders accept.
pub const MAX_DIM: usize = 4096;

/// Top-level occupation above which truncated oscillators are reported as leaking.
pub const LEAKAGE_WARNING: f64 = 1e-3;

/// Strictly increasing history times `t_0 < t_1 < … < t_n`, `n ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    times: Vec<f64>,
}

impl Schedule {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "schedule needs t_0 and at least one history time, got {} entries",
                times.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("schedule times must be finite".into()));
        }
        if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "schedule is not strictly increasing at index {}",
                k + 1
            )));
        }
        Ok(Self { times })
    }

    /// `t_0, t_0 + dt, …, t_0 + n·dt`.
    pub fn uniform(t0: f64, dt: f64, n: usize) -> Result<Self> {
        Self::new((0..=n).map(|k| t0 + dt * k as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of history times `n` (excludes `t_0`).
    pub fn num_intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Unitaries `U(t_i → t_{i+1})` for each schedule interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorSet {
    times: Vec<f64>,
    steps: Vec<ComplexMatrix>,
}

impl PropagatorSet {
    pub fn from_steps(schedule: &Schedule, steps: Vec<ComplexMatrix>) -> Result<Self> {
        Self::from_steps_with(schedule, steps, &Tolerances::default())
    }

    pub fn from_steps_with(schedule: &Schedule, steps: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        if steps.len() != schedule.num_intervals() {
            return Err(Error::DimensionMismatch {
                context: "propagator count",
                expected: schedule.num_intervals(),
                found: steps.len(),
            });
        }
        let d = steps[0].require_square("propagator")?;
        for u in &steps {
            u.require_dim(d, "propagator")?;
            let defect = u.unitarity_defect();
            if defect > tol.unitary {
                return Err(Error::NotUnitary { defect });
            }
        }
        Ok(Self {
            times: schedule.times().to_vec(),
            steps,
        })
    }

    pub fn dim(&self) -> usize {
        self.steps[0].rows()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `U(t_i → t_{i+1})`.
    pub fn step(&self, i: usize) -> &ComplexMatrix {
        &self.steps[i]
    }

    pub fn steps(&self) -> &[ComplexMatrix] {
        &self.steps
    }

    /// `U(t_i → t_j)` for `i ≤ j`, composed from the interval steps.
    pub fn between(&self, i: usize, j: usize) -> Result<ComplexMatrix> {
        if i > j || j > self.steps.len() {
            return Err(Error::InvalidArgument(format!(
                "no propagator from t_{i} to t_{j} on {} intervals",
                self.steps.len()
            )));
        }
        let mut u = ComplexMatrix::identity(self.dim());
        for step in &self.steps[i..j] {
            u = step * &u;
        }
        Ok(u)
    }

    /// `U(t_0 → t_k)` for `k = 0..=n`.
    pub fn cumulative(&self) -> Vec<ComplexMatrix> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut u = ComplexMatrix::identity(self.dim());
        out.push(u.clone());
        for step in &self.steps {
            u = step * &u;
            out.push(u.clone());
        }
        out
    }

    /// `{V U V†}` for a fixed unitary `V`.
    pub fn conjugated(&self, v: &ComplexMatrix) -> Self {
        Self {
            times: self.times.clone(),
            steps: self.steps.iter().map(|u| u.conjugate_by(v)).collect(),
        }
    }
}

/// Anything that produces one unitary per schedule interval on a bipartite
/// (system ⊗ rest) space.
pub trait Dynamics {
    fn space(&self) -> &CompositeSpace;
    fn system_factor(&self) -> usize;
    fn description(&self) -> &str;
    fn propagators(&self, schedule: &Schedule) -> Result<PropagatorSet>;
}

/// Full-system Hamiltonian on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianModel {
    h: ComplexMatrix,
    space: CompositeSpace,
    system_factor: usize,
    description: String,
}

impl HamiltonianModel {
    pub fn new(h: ComplexMatrix, space: CompositeSpace, system_factor: usize, description: impl Into<String>) -> Result<Self> {
        h.require_dim(space.total_dim(), "Hamiltonian")?;
        space.factor_dim(system_factor)?;
        let asym = h.hermiticity_defect();
        if asym > Tolerances::default().herm {
            return Err(Error::NotHermitian {
                max_asymmetry: asym,
            });
        }
        Ok(Self {
            h,
            space,
            system_factor,
            description: description.into(),
        })
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.h
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        hermitian_spectrum(&self.h)
    }

    /// `U(0 → t)` for every `t` in `times`, reusing one eigendecomposition.
    pub fn evolution_grid(&self, times: &[f64]) -> Result<Vec<(f64, ComplexMatrix)>> {
        let spectrum = self.spectrum()?;
        Ok(times.iter().map(|&t| (t, spectrum.propagator(t))).collect())
    }
}

impl Dynamics for HamiltonianModel {
    fn space(&self) -> &CompositeSpace {
        &self.space
    }

    fn system_factor(&self) -> usize {
        self.system_factor
    }

    fn description(&self) -> &str {
        &self.description
    }

    fn propagators(&self, schedule: &Schedule) -> Result<PropagatorSet> {
        let spectrum = self.spectrum()?;
        let steps = schedule
            .intervals()
            .map(|(a, b)| spectrum.propagator(b - a))
            .collect();
        PropagatorSet::from_steps(schedule, steps)
    }
}

/// `U(t_i → t_{i+1}) = exp(−i H (t_{i+1} − t_i))` for each interval.
pub fn propagators(model: &dyn Dynamics, schedule: &Schedule) -> Result<PropagatorSet> {
    model.propagators(schedule)
}

/// How a prescribed-unitary model assigns unitaries to schedule intervals.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRule {
    /// The same unitary on every interval.
    Repeat(ComplexMatrix),
    /// One listed unitary per interval; more intervals than entries is an error.
    Sequence(Vec<ComplexMatrix>),
    /// Listed unitaries first, identity afterwards.
    SequenceThenIdentity(Vec<ComplexMatrix>),
}

/// A model defined by prescribed unitaries rather than a Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct PrescribedModel {
    space: CompositeSpace,
    system_factor: usize,
    description: String,
    rule: StepRule,
}

impl PrescribedModel {
    pub fn new(space: CompositeSpace, system_factor: usize, description: impl Into<String>, rule: StepRule) -> Result<Self> {
        space.factor_dim(system_factor)?;
        let unitaries: &[ComplexMatrix] = match &rule {
            StepRule::Repeat(u) => std::slice::from_ref(u),
            StepRule::Sequence(us) | StepRule::SequenceThenIdentity(us) => us,
        };
        for u in unitaries {
            u.require_dim(space.total_dim(), "prescribed unitary")?;
            let defect = u.unitarity_defect();
            if defect > Tolerances::default().unitary {
                return Err(Error::NotUnitary { defect });
            }
        }
        Ok(Self {
            space,
            system_factor,
            description: description.into(),
            rule,
        })
    }

    pub fn rule(&self) -> &StepRule {
        &self.rule
    }

    /// Unitary applied on interval `i` (0-based).
    pub fn interval_unitary(&self, i: usize) -> Result<ComplexMatrix> {
        match &self.rule {
            StepRule::Repeat(u) => Ok(u.clone()),
            StepRule::Sequence(us) => us.get(i).cloned().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{} defines {} steps but interval {} was requested",
                    self.description,
                    us.len(),
                    i + 1
                ))
            }),
            StepRule::SequenceThenIdentity(us) => Ok(us
                .get(i)
                .cloned()
                .unwrap_or_else(|| ComplexMatrix::identity(self.space.total_dim()))),
        }
    }
}

impl Dynamics for PrescribedModel {
    fn space(&self) -> &CompositeSpace {
        &self.space
    }

    fn system_factor(&self) -> usize {
        self.system_factor
    }

    fn description(&self) -> &str {
        &self.description
    }

    fn propagators(&self, schedule: &Schedule) -> Result<PropagatorSet> {
        let steps = (0..schedule.num_intervals())
            .map(|i| self.interval_unitary(i))
            .collect::<Result<Vec<_>>>()?;
        PropagatorSet::from_steps(schedule, steps)
    }
}

/// `H = Σ_k g_k σ_z^(S) ⊗ σ_z^(k)` on `2 ⊗ 2^n`, system factor 0.
///
/// The Hamiltonian is diagonal in the joint z basis and commutes with
/// `σ_z ⊗ I`, so system populations are conserved exactly.
pub fn central_spin_dephasing(n_bath: usize, couplings: &[f64]) -> Result<HamiltonianModel> {
    if couplings.len() != n_bath {
        return Err(Error::DimensionMismatch {
            context: "central spin couplings",
            expected: n_bath,
            found: couplings.len(),
        });
    }
    if !(1..=12).contains(&n_bath) {
        return Err(Error::InvalidArgument(format!(
            "central spin model supports 1..=12 bath spins, got {n_bath}"
        )));
    }
    if couplings.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidArgument("couplings must be finite".into()));
    }
    let space = CompositeSpace::qubits(n_bath + 1)?;
    let dim = space.total_dim();
    let diag: Vec<f64> = (0..dim)
        .map(|idx| {
            // bit (n_bath - k) of idx holds spin k; system spin is the most significant
            let s = if idx >> n_bath & 1 == 0 { 1.0 } else { -1.0 };
            couplings
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    let zk = if idx >> (n_bath - 1 - k) & 1 == 0 { 1.0 } else { -1.0 };
                    g * s * zk
                })
                .sum()
        })
        .collect();
    HamiltonianModel::new(
        ComplexMatrix::real_diag(&diag),
        space,
        0,
        format!("central spin dephasing, {n_bath} bath spins"),
    )
}

/// Couplings drawn uniformly from `[g_min, g_max]` with a seeded generator.
pub fn seeded_couplings(n: usize, g_min: f64, g_max: f64, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            g_min + (g_max - g_min) * u
        })
        .collect()
}

/// Truncated annihilation operator: `a|n⟩ = √n |n−1⟩` on `d` levels.
pub fn annihilation(d: usize) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// `H = ω a†a + Σ_k ω_k b_k†b_k + Σ_k c_k (a + a†)(b_k + b_k†)` with the system
/// oscillator as factor 0 and `n_bath` bath oscillators after it.
pub fn truncated_oscillator_bath(
    d_sys: usize,
    n_bath: usize,
    d_bath: usize,
    omega: f64,
    bath_omegas: &[f64],
    couplings: &[f64],
) -> Result<HamiltonianModel> {
    if bath_omegas.len() != n_bath || couplings.len() != n_bath {
        return Err(Error::DimensionMismatch {
            context: "oscillator bath parameters",
            expected: n_bath,
            found: if bath_omegas.len() != n_bath {
                bath_omegas.len()
            } else {
                couplings.len()
            },
        });
    }
    if d_sys < 1 || d_bath < 1 {
        return Err(Error::InvalidArgument("oscillator level counts must be positive".into()));
    }
    let total = u32::try_from(n_bath)
        .ok()
        .and_then(|n| d_bath.checked_pow(n))
        .and_then(|b| b.checked_mul(d_sys));
    match total {
        Some(t) if t <= MAX_DIM => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "oscillator model dimension {d_sys}·{d_bath}^{n_bath} exceeds the budget of {MAX_DIM}"
            )))
        }
    }
    let mut dims = vec![d_sys];
    dims.extend(std::iter::repeat_n(d_bath, n_bath));
    let space = CompositeSpace::new(dims)?;

    let a = annihilation(d_sys);
    let b = annihilation(d_bath);
    let num_a = &a.adjoint() * &a;
    let num_b = &b.adjoint() * &b;
    let x_a = &a + &a.adjoint();
    let x_b = &b + &b.adjoint();
    let id_b = ComplexMatrix::identity(d_bath);

    let bath_op = |k: usize, op: &ComplexMatrix| -> ComplexMatrix {
        let factors: Vec<&ComplexMatrix> = (0..n_bath).map(|j| if j == k { op } else { &id_b }).collect();
        kron_all(factors)
    };
    let id_bath_all = ComplexMatrix::identity(space.total_dim() / d_sys);

    let mut h = kron(&num_a, &id_bath_all).scale_real(omega);
    for k in 0..n_bath {
        h += &kron(&ComplexMatrix::identity(d_sys), &bath_op(k, &num_b)).scale_real(bath_omegas[k]);
        h += &kron(&x_a, &bath_op(k, &x_b)).scale_real(couplings[k]);
    }
    HamiltonianModel::new(
        h.hermitian_part(),
        space,
        0,
        format!("truncated oscillator bath, {d_sys} system levels, {n_bath}×{d_bath} bath levels"),
    )
}

/// Highest-level populations of selected oscillator factors.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    /// `(factor, population of its top level)`.
    pub top_level: Vec<(usize, f64)>,
    pub max: f64,
    pub exceeds_warning: bool,
}

/// Reports how much population sits in the highest retained level of each
/// listed factor, logging a warning above [`LEAKAGE_WARNING`].
pub fn truncation_leakage(rho: &DensityOperator, factors: &[usize]) -> Result<TruncationReport> {
    let mut top_level = Vec::with_capacity(factors.len());
    for &f in factors {
        let d = rho.space().factor_dim(f)?;
        let reduced = crate::tensor::partial_trace(rho.matrix(), rho.space(), &[f])?;
        top_level.push((f, reduced.get(d - 1, d - 1).re));
    }
    let max = top_level.iter().map(|&(_, p)| p).fold(0.0, f64::max);
    let exceeds_warning = max > LEAKAGE_WARNING;
    if exceeds_warning {
        log::warn!("truncated oscillator top-level occupation {max:.3e} exceeds {LEAKAGE_WARNING:.0e}");
    }
    Ok(TruncationReport {
        top_level,
        max,
        exceeds_warning,
    })
}

/// `exp(−i θ σ_x / 2)`.
pub fn x_rotation(theta: f64) -> ComplexMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    let id = ComplexMatrix::identity(2).scale_real(c);
    &id - &pauli::x().scale(C64::new(0.0, s))
}

/// Slit (factor 0, `|L⟩ = |0⟩`, `|R⟩ = |1⟩`) ⊗ spin (factor 1).
///
/// The Hamiltonian is zero: slit and spin never couple directly. Passing the
/// slits applies the prescribed unitary `|L⟩⟨L| ⊗ R_x(θ) + |R⟩⟨R| ⊗ R_x(−θ)`
/// on the first schedule interval and identity afterwards. With the spin
/// starting in `|0⟩` the two spin records overlap by `cos θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSlitModel {
    pub theta: f64,
    pub hamiltonian: HamiltonianModel,
    pub passage: ComplexMatrix,
    prescribed: PrescribedModel,
}

pub fn third_party_two_slit(theta: f64) -> Result<TwoSlitModel> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument("coupling angle must be finite".into()));
    }
    let space = CompositeSpace::qubits(2)?;
    let left = ComplexMatrix::real_diag(&[1.0, 0.0]);
    let right = ComplexMatrix::real_diag(&[0.0, 1.0]);
    let passage = &kron(&left, &x_rotation(theta)) + &kron(&right, &x_rotation(-theta));
    let hamiltonian = HamiltonianModel::new(
        ComplexMatrix::zeros(4, 4),
        space.clone(),
        0,
        "two-slit path ⊗ spin, no direct coupling",
    )?;
    let prescribed = PrescribedModel::new(
        space,
        0,
        format!("third-party two-slit, theta = {theta}"),
        StepRule::SequenceThenIdentity(vec![passage.clone()]),
    )?;
    Ok(TwoSlitModel {
        theta,
        hamiltonian,
        passage,
        prescribed,
    })
}

impl TwoSlitModel {
    /// `|slit⟩ ⊗ |0⟩_spin`.
    pub fn initial_state(&self, slit: &[C64]) -> Result<DensityOperator> {
        let psi = crate::tensor::kron_vec(slit, &[ONE, ZERO]);
        crate::state::pure_density_on(&psi, self.prescribed.space().clone())
    }
}

impl Dynamics for TwoSlitModel {
    fn space(&self) -> &CompositeSpace {
        self.prescribed.space()
    }

    fn system_factor(&self) -> usize {
        0
    }

    fn description(&self) -> &str {
        self.prescribed.description()
    }

    fn propagators(&self, schedule: &Schedule) -> Result<PropagatorSet> {
        self.prescribed.propagators(schedule)
    }
}

/// How the perfect recorder writes the system's z value into its environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecorderMode {
    /// Every step copies into all environment qubits.
    CopyAll,
    /// Step `k` copies into environment qubit `k` only, so each step meets an
    /// untouched environment qubit.
    FreshPerStep,
}

impl fmt::Display for RecorderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecorderMode::CopyAll => write!(f, "copy_all"),
            RecorderMode::FreshPerStep => write!(f, "fresh_per_step"),
        }
    }
}

/// System qubit (factor 0) ⊗ `n_env` environment qubits starting in `|0…0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecorderModel {
    pub n_env: usize,
    pub mode: RecorderMode,
    prescribed: PrescribedModel,
}

/// Permutation unitary flipping each listed environment qubit when the system is `|1⟩`.
fn controlled_flips(n_env: usize, targets: &[usize]) -> ComplexMatrix {
    let dim = 1usize << (n_env + 1);
    let mut mask = 0usize;
    for &k in targets {
        // environment qubit k (0-based) is factor k + 1
        mask |= 1 << (n_env - 1 - k);
    }
    let mut u = ComplexMatrix::zeros(dim, dim);
    for idx in 0..dim {
        let system_one = idx >> n_env & 1 == 1;
        let out = if system_one { idx ^ mask } else { idx };
        u[(out, idx)] = ONE;
    }
    u
}

pub fn perfect_recorder(n_env: usize) -> Result<RecorderModel> {
    recorder_with_mode(n_env, RecorderMode::CopyAll)
}

pub fn recorder_with_mode(n_env: usize, mode: RecorderMode) -> Result<RecorderModel> {
    if !(1..=10).contains(&n_env) {
        return Err(Error::InvalidArgument(format!(
            "perfect recorder supports 1..=10 environment qubits, got {n_env}"
        )));
    }
    let space = CompositeSpace::qubits(n_env + 1)?;
    let rule = match mode {
        RecorderMode::CopyAll => StepRule::Repeat(controlled_flips(n_env, &(0..n_env).collect::<Vec<_>>())),
        RecorderMode::FreshPerStep => {
            StepRule::Sequence((0..n_env).map(|k| controlled_flips(n_env, &[k])).collect())
        }
    };
    let prescribed = PrescribedModel::new(
        space,
        0,
        format!("perfect recorder, {n_env} environment qubits, {mode}"),
        rule,
    )?;
    Ok(RecorderModel {
        n_env,
        mode,
        prescribed,
    })
}

impl RecorderModel {
    /// The step unitary of interval `i`.
    pub fn step(&self, i: usize) -> Result<ComplexMatrix> {
        self.prescribed.interval_unitary(i)
    }

    /// `ρ_S ⊗ |0…0⟩⟨0…0|`.
    pub fn initial_state(&self, rho_s: &DensityOperator) -> Result<DensityOperator> {
        rho_s.matrix().require_dim(2, "recorder system state")?;
        let env_dim = 1usize << self.n_env;
        let mut env = ComplexMatrix::zeros(env_dim, env_dim);
        env[(0, 0)] = ONE;
        let m = kron(rho_s.matrix(), &env);
        DensityOperator::new(m, self.prescribed.space().clone())
    }
}

impl Dynamics for RecorderModel {
    fn space(&self) -> &CompositeSpace {
        self.prescribed.space()
    }

    fn system_factor(&self) -> usize {
        0
    }

    fn description(&self) -> &str {
        self.prescribed.description()
    }

    fn propagators(&self, schedule: &Schedule) -> Result<PropagatorSet> {
        self.prescribed.propagators(schedule)
    }
}

/// Heisenberg-picture projector `U† P U`.
pub fn heisenberg_projector(p: &ComplexMatrix, u: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = u.require_square("propagator")?;
    p.require_dim(d, "projector")?;
    let defect = u.unitarity_defect();
    if defect > Tolerances::default().unitary {
        return Err(Error::NotUnitary { defect });
    }
    Ok(p.conjugate_by(&u.adjoint()))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_4, PI};

    use super::*;
    use crate::tensor::{embed, partial_trace, random_hermitian};

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(vec![0.0]).is_err());
        assert!(Schedule::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(Schedule::new(vec![0.0, 2.0, 1.0]).is_err());
        assert_eq!(Schedule::uniform(0.0, 0.5, 3).unwrap().times(), &[0.0, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn zero_coupling_central_spin_is_free() {
        let m = central_spin_dephasing(1, &[0.0]).unwrap();
        assert_eq!(m.hamiltonian().max_abs(), 0.0);
        assert!(central_spin_dephasing(2, &[0.1]).is_err());
        assert!(central_spin_dephasing(13, &[0.1; 13]).is_err());
    }

    #[test]
    fn central_spin_matches_kron_construction_and_commutes_with_sz() {
        let g = [0.3, -0.7, 1.1];
        let m = central_spin_dephasing(3, &g).unwrap();
        let space = m.space().clone();
        let sz_s = embed(&pauli::z(), &space, 0).unwrap();
        let mut h = ComplexMatrix::zeros(16, 16);
        for (k, gk) in g.iter().enumerate() {
            h += &(&sz_s * &embed(&pauli::z(), &space, k + 1).unwrap()).scale_real(*gk);
        }
        assert!((m.hamiltonian() - &h).max_abs() < 1e-15);
        let comm = ComplexMatrix::commutator(m.hamiltonian(), &sz_s);
        assert_eq!(comm.max_abs(), 0.0);
        assert!(m.hamiltonian().hermiticity_defect() <= 1e-12);
    }

    #[test]
    fn single_spin_coherence_factor_is_cos_2gt() {
        let g = 0.37;
        let m = central_spin_dephasing(1, &[g]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [C64::new(h, 0.0), C64::new(h, 0.0)];
        let psi = crate::tensor::kron_vec(&plus, &plus);
        let spectrum = m.spectrum().unwrap();
        for t in [0.1, 0.8, 2.5] {
            let out = spectrum.evolve_vector(t, &psi);
            let rho = ComplexMatrix::outer(&out, &out);
            let rs = partial_trace(&rho, m.space(), &[0]).unwrap();
            assert!((rs.get(0, 1).norm() - 0.5 * (2.0 * g * t).cos().abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn oscillator_two_by_two_entries() {
        let (w, wb, c) = (1.3, 0.7, 0.2);
        let m = truncated_oscillator_bath(2, 1, 2, w, &[wb], &[c]).unwrap();
        // basis |n_s n_b⟩: 00, 01, 10, 11; a = [[0,1],[0,0]]
        let expected = ComplexMatrix::from_real(
            4,
            4,
            &[
                0.0, 0.0, 0.0, c, //
                0.0, wb, c, 0.0, //
                0.0, c, w, 0.0, //
                c, 0.0, 0.0, w + wb,
            ],
        )
        .unwrap();
        assert!((m.hamiltonian() - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn oscillator_trace_from_number_operators() {
        let (ds, n, db, w) = (3, 2, 3, 0.9);
        let wk = [0.4, 1.7];
        let m = truncated_oscillator_bath(ds, n, db, w, &wk, &[0.3, 0.1]).unwrap();
        let tr_num = |d: usize| (d * (d - 1) / 2) as f64;
        let bath_total = (db as f64).powi(n as i32);
        let expected = w * tr_num(ds) * bath_total
            + wk.iter().map(|x| x * tr_num(db) * ds as f64 * bath_total / db as f64).sum::<f64>();
        assert!((m.hamiltonian().trace().re - expected).abs() < 1e-12);
        assert!(m.hamiltonian().hermiticity_defect() <= 1e-12);
    }

    #[test]
    fn oscillator_budget() {
        assert!(truncated_oscillator_bath(4, 6, 4, 1.0, &[1.0; 6], &[0.1; 6]).is_err());
        assert!(truncated_oscillator_bath(2, 1, 2, 1.0, &[1.0, 2.0], &[0.1]).is_err());
    }

    #[test]
    fn decoupled_oscillator_gives_unitary_reduced_dynamics() {
        let m = truncated_oscillator_bath(3, 1, 3, 1.0, &[0.6], &[0.0]).unwrap();
        let sched = Schedule::new(vec![0.0, 0.9]).unwrap();
        let u = m.propagators(&sched).unwrap().step(0).clone();
        let rho_s = crate::tensor::random_density(3, 2);
        let rho_e = crate::tensor::random_density(3, 3);
        let full = kron(&rho_s, &rho_e).conjugate_by(&u);
        let reduced = partial_trace(&full, m.space(), &[0]).unwrap();
        // purity of the reduced state is conserved under unitary reduced dynamics
        let p0 = ComplexMatrix::trace_product(&rho_s, &rho_s).re;
        let p1 = ComplexMatrix::trace_product(&reduced, &reduced).re;
        assert!((p0 - p1).abs() < 1e-12);
    }

    #[test]
    fn leakage_monitor_flags_top_level() {
        let space = CompositeSpace::new(vec![3]).unwrap();
        let rho = DensityOperator::new(ComplexMatrix::real_diag(&[0.9, 0.09, 0.01]), space).unwrap();
        let r = truncation_leakage(&rho, &[0]).unwrap();
        assert!((r.max - 0.01).abs() < 1e-15);
        assert!(r.exceeds_warning);
    }

    #[test]
    fn two_slit_spin_overlap_is_cos_theta() {
        for theta in [0.0, 0.4, PI / 2.0, PI] {
            let m = third_party_two_slit(theta).unwrap();
            let l = m.passage.matvec(&[ONE, ZERO, ZERO, ZERO]);
            let r = m.passage.matvec(&[ZERO, ZERO, ONE, ZERO]);
            let overlap = crate::tensor::inner(&r[2..], &l[..2]);
            assert!((overlap - C64::new(theta.cos(), 0.0)).norm() < 1e-15);
            assert_eq!(m.hamiltonian.hamiltonian().max_abs(), 0.0);
        }
    }

    #[test]
    fn recorder_steps() {
        let rec = perfect_recorder(1).unwrap();
        let space = rec.space().clone();
        let step = rec.step(0).unwrap();
        let zero = crate::state::pure_density(&[ONE, ZERO]).unwrap();
        let rho0 = rec.initial_state(&zero).unwrap();
        assert_eq!(rho0.matrix().conjugate_by(&step), *rho0.matrix());

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [C64::new(h, 0.0), C64::new(h, 0.0)];
        let psi = crate::tensor::kron_vec(&plus, &[ONE, ZERO]);
        let out = step.matvec(&psi);
        let bell = [C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)];
        assert_eq!(out, bell);
        let reduced = partial_trace(&ComplexMatrix::outer(&out, &out), &space, &[0]).unwrap();
        assert!((&reduced - &ComplexMatrix::identity(2).scale_real(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn fresh_recorder_runs_out_of_qubits() {
        let rec = recorder_with_mode(2, RecorderMode::FreshPerStep).unwrap();
        assert!(rec.propagators(&Schedule::uniform(0.0, 1.0, 2).unwrap()).is_ok());
        assert!(rec.propagators(&Schedule::uniform(0.0, 1.0, 3).unwrap()).is_err());
        assert!(perfect_recorder(0).is_err());
        assert!(perfect_recorder(11).is_err());
    }

    #[test]
    fn propagator_examples() {
        let m = HamiltonianModel::new(
            random_hermitian(4, 8),
            CompositeSpace::qubits(2).unwrap(),
            0,
            "random",
        )
        .unwrap();
        let sched = Schedule::new(vec![0.0, 0.4, 0.8]).unwrap();
        let props = m.propagators(&sched).unwrap();
        let double = m
            .propagators(&Schedule::new(vec![0.0, 0.8]).unwrap())
            .unwrap();
        assert!((&props.between(0, 2).unwrap() - double.step(0)).max_abs() <= 1e-10);
        assert_eq!(props.between(1, 1).unwrap(), ComplexMatrix::identity(4));

        let cs = central_spin_dephasing(2, &[0.2, 0.5]).unwrap();
        let u = cs.propagators(&sched).unwrap().step(0).clone();
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert!(u.get(i, j).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn heisenberg_projector_examples() {
        let p = ComplexMatrix::real_diag(&[1.0, 0.0]);
        assert_eq!(heisenberg_projector(&p, &ComplexMatrix::identity(2)).unwrap(), p);
        let u = crate::tensor::unitary_exp(&pauli::y(), FRAC_PI_4).unwrap();
        assert_eq!(
            heisenberg_projector(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)).unwrap(),
            ComplexMatrix::identity(2)
        );
        let pt = heisenberg_projector(&p, &u).unwrap();
        // U = exp(−iπσ_y/4) = [[c, −s], [s, c]]; U†|0⟩ = c|0⟩ − s|1⟩
        let (s, c) = FRAC_PI_4.sin_cos();
        let v = [C64::new(c, 0.0), C64::new(-s, 0.0)];
        assert!((&pt - &ComplexMatrix::outer(&v, &v)).max_abs() < 1e-15);
        assert!(heisenberg_projector(&p, &ComplexMatrix::real_diag(&[1.0, 2.0])).is_err());
    }
}
