//! Scenario files: schema, strict parsing and validation into runnable objects.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use histkit::histories::HistorySetSpec;
use histkit::models::{
    central_spin_dephasing, perfect_recorder, recorder_with_mode, seeded_couplings, third_party_two_slit,
    truncated_oscillator_bath, Dynamics, HamiltonianModel, RecorderMode, Schedule,
};
use histkit::open_systems::CandidateBasis;
use histkit::state::{
    coarse_grain_family, family_from_basis, DensityOperator, ProjectorFamily, ReferenceEnvState, ReferenceSpec,
};
use histkit::tensor::{kron_all, ONE, ZERO};
use histkit::{ComplexMatrix, CompositeSpace, C64};
use serde::{Deserialize, Serialize};

/// `[re, im]`.
pub type Complex = [f64; 2];
pub type VectorJson = Vec<Complex>;
pub type MatrixJson = Vec<Vec<Complex>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub model: ModelSpec,
    pub initial_state: StateSpec,
    pub schedule: Vec<f64>,
    pub families: Vec<FamilySpec>,
    /// Factor the families act on; defaults to the model's system factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_factor: Option<usize>,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub tolerances: TolerancesSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub reference: ReferenceJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer: Option<PointerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redundancy: Option<RedundancySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    CentralSpin {
        n_bath: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        couplings: Option<Vec<f64>>,
        /// `[g_min, g_max]` for seeded couplings.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coupling_range: Option<[f64; 2]>,
    },
    TruncatedOscillator {
        d_sys: usize,
        n_bath: usize,
        d_bath: usize,
        omega: f64,
        bath_omegas: Vec<f64>,
        couplings: Vec<f64>,
    },
    ThirdPartyTwoSlit {
        theta: f64,
    },
    PerfectRecorder {
        n_env: usize,
        #[serde(default)]
        fresh: bool,
    },
    Explicit {
        dims: Vec<usize>,
        hamiltonian: MatrixJson,
        #[serde(default)]
        system_factor: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Pure { vector: VectorJson },
    Product { factors: Vec<FactorState> },
    Matrix { matrix: MatrixJson },
}

/// One tensor factor of a product state.
///
/// Named kets: `"0"`, `"1"`, … (basis index), `"+"` (uniform superposition),
/// `"-"`, `"+i"`, `"-i"` (qubits only) and `"mixed"` (`I/d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorState {
    Named(String),
    Vector {
        vector: VectorJson,
    },
    Matrix {
        matrix: MatrixJson,
    },
}

/// Exactly one of `basis` and `vectors`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// `z` (alias `computational`), `x`, `y` or `trivial`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<VectorJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Kolmogorov,
    Weak,
    Medium,
    Jss,
    PazZurek,
    Semigroup,
    Pointer,
    Redundancy,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Kolmogorov => "kolmogorov",
            Check::Weak => "weak",
            Check::Medium => "medium",
            Check::Jss => "jss",
            Check::PazZurek => "paz_zurek",
            Check::Semigroup => "semigroup",
            Check::Pointer => "pointer",
            Check::Redundancy => "redundancy",
        }
    }

    /// Checks that report values without a pass/fail verdict.
    pub fn informational(self) -> bool {
        matches!(self, Check::Semigroup | Check::Pointer | Check::Redundancy)
    }
}

fn default_eps() -> f64 {
    1e-8
}

fn default_p_floor() -> f64 {
    histkit::histories::DEFAULT_P_FLOOR
}

fn default_tight() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesSpec {
    /// Decoherence and Kolmogorov checks.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Diagonal below which a history counts as empty.
    #[serde(default = "default_p_floor")]
    pub p_floor: f64,
    #[serde(default = "default_tight")]
    pub jss: f64,
    #[serde(default = "default_tight")]
    pub paz_zurek: f64,
}

impl Default for TolerancesSpec {
    fn default() -> Self {
        Self {
            eps: default_eps(),
            p_floor: default_p_floor(),
            jss: default_tight(),
            paz_zurek: default_tight(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceJson {
    #[default]
    CompleteIgnorance,
    Thermal {
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_env: Option<MatrixJson>,
    },
    Explicit {
        matrix: MatrixJson,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<VectorJson>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerSpec {
    /// Defaults to `z` and `x` on a qubit system.
    #[serde(default)]
    pub bases: Vec<CandidateSpec>,
    /// Defaults to the scenario's initial state.
    #[serde(default)]
    pub initial_states: Vec<StateSpec>,
    /// Defaults to the schedule times after the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

fn default_samples() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedundancySpec {
    /// Defaults to `1..=n_env`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment_sizes: Option<Vec<usize>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for RedundancySpec {
    fn default() -> Self {
        Self {
            fragment_sizes: None,
            samples: default_samples(),
        }
    }
}

/// Problem with a scenario, located by a field path such as `families[1].vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub path: String,
    pub message: String,
}

impl ScenarioError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ScenarioError {}

type SResult<T> = std::result::Result<T, ScenarioError>;

fn at<T>(path: impl Into<String>, r: histkit::Result<T>) -> SResult<T> {
    r.map_err(|e| ScenarioError::new(path, e))
}

/// Strict JSON parsing; errors carry the field path and line/column.
pub fn parse_str(text: &str) -> SResult<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::new(if path == "." { String::new() } else { path }, inner)
    })?;
    Ok(scenario)
}

pub fn parse_value(value: serde_json::Value) -> SResult<Scenario> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::new(if path == "." { String::new() } else { path }, e.into_inner())
    })
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(path: &Path) -> SResult<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::new("", format!("cannot read {}: {e}", path.display())))?;
    let scenario = parse_str(&text)?;
    scenario.prepare()?;
    Ok(scenario)
}

fn complex(c: &Complex) -> C64 {
    C64::new(c[0], c[1])
}

fn vector(v: &[Complex]) -> Vec<C64> {
    v.iter().map(complex).collect()
}

fn matrix(m: &MatrixJson, path: &str) -> SResult<ComplexMatrix> {
    let rows: Vec<Vec<C64>> = m.iter().map(|r| vector(r)).collect();
    at(path, ComplexMatrix::from_rows(&rows))
}

/// Scenario resolved into library objects.
pub struct Prepared {
    pub model: Box<dyn Dynamics + Send + Sync>,
    pub hamiltonian: Option<HamiltonianModel>,
    pub n_env_qubits: Option<usize>,
    pub rho: DensityOperator,
    pub schedule: Schedule,
    pub spec: HistorySetSpec,
    pub family_factor: usize,
    pub reference: ReferenceEnvState,
    pub couplings: Option<Vec<f64>>,
}

fn named_ket(name: &str, d: usize, path: &str) -> SResult<FactorValue> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let qubit = |v: Vec<C64>| {
        if d == 2 {
            Ok(FactorValue::Ket(v))
        } else {
            Err(ScenarioError::new(path, format!("ket '{name}' needs a qubit factor, this one has dimension {d}")))
        }
    };
    match name {
        "+" => Ok(FactorValue::Ket(vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d])),
        "-" => qubit(vec![C64::new(h, 0.0), C64::new(-h, 0.0)]),
        "+i" => qubit(vec![C64::new(h, 0.0), C64::new(0.0, h)]),
        "-i" => qubit(vec![C64::new(h, 0.0), C64::new(0.0, -h)]),
        "mixed" => Ok(FactorValue::Mixed(ComplexMatrix::identity(d).scale_real(1.0 / d as f64))),
        other => match other.parse::<usize>() {
            Ok(k) if k < d => {
                let mut v = vec![ZERO; d];
                v[k] = ONE;
                Ok(FactorValue::Ket(v))
            }
            _ => Err(ScenarioError::new(path, format!("unknown ket '{other}' for dimension {d}"))),
        },
    }
}

enum FactorValue {
    Ket(Vec<C64>),
    Mixed(ComplexMatrix),
}

fn build_state(spec: &StateSpec, space: &CompositeSpace, path: &str) -> SResult<DensityOperator> {
    match spec {
        StateSpec::Pure { vector: v } => {
            if v.len() != space.total_dim() {
                return Err(ScenarioError::new(
                    format!("{path}.vector"),
                    format!("expected {} amplitudes, found {}", space.total_dim(), v.len()),
                ));
            }
            at(format!("{path}.vector"), histkit::state::pure_density_on(&vector(v), space.clone()))
        }
        StateSpec::Matrix { matrix: m } => {
            let p = format!("{path}.matrix");
            let m = matrix(m, &p)?;
            at(p, DensityOperator::new(m, space.clone()))
        }
        StateSpec::Product { factors } => {
            if factors.len() != space.num_factors() {
                return Err(ScenarioError::new(
                    format!("{path}.factors"),
                    format!("model has {} factors, state lists {}", space.num_factors(), factors.len()),
                ));
            }
            let mut mats = Vec::with_capacity(factors.len());
            for (k, (f, &d)) in factors.iter().zip(space.factor_dims()).enumerate() {
                let p = format!("{path}.factors[{k}]");
                let value = match f {
                    FactorState::Named(name) => named_ket(name, d, &p)?,
                    FactorState::Vector { vector: v } => FactorValue::Ket(vector(v)),
                    FactorState::Matrix { matrix: m } => FactorValue::Mixed(matrix(m, &p)?),
                };
                let m = match value {
                    FactorValue::Ket(v) => {
                        if v.len() != d {
                            return Err(ScenarioError::new(p, format!("expected dimension {d}, found {}", v.len())));
                        }
                        at(p, histkit::state::pure_density(&v))?.into_matrix()
                    }
                    FactorValue::Mixed(m) => {
                        at(p.clone(), m.require_dim(d, "factor state"))?;
                        at(p, DensityOperator::single(m))?.into_matrix()
                    }
                };
                mats.push(m);
            }
            at(path, DensityOperator::new(kron_all(mats.iter()), space.clone()))
        }
    }
}

fn named_family(name: &str, d: usize, path: &str) -> SResult<ProjectorFamily> {
    match name {
        "z" | "computational" => Ok(ProjectorFamily::computational(d)),
        "trivial" => Ok(ProjectorFamily::trivial(d)),
        "x" | "y" if d != 2 => Err(ScenarioError::new(path, format!("basis '{name}' needs a qubit, dimension is {d}"))),
        "x" => Ok(ProjectorFamily::qubit_x()),
        "y" => {
            let v = qubit_y_vectors();
            at(path, family_from_basis(&v, None))?
                .with_labels(vec!["+i".into(), "-i".into()])
                .map_err(|e| ScenarioError::new(path, e))
        }
        other => Err(ScenarioError::new(path, format!("unknown basis '{other}'"))),
    }
}

fn qubit_y_vectors() -> Vec<Vec<C64>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![vec![C64::new(h, 0.0), C64::new(0.0, h)], vec![C64::new(h, 0.0), C64::new(0.0, -h)]]
}

fn named_vectors(name: &str, d: usize, path: &str) -> SResult<Vec<Vec<C64>>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match name {
        "z" | "computational" => Ok((0..d)
            .map(|k| (0..d).map(|i| if i == k { ONE } else { ZERO }).collect())
            .collect()),
        "x" if d == 2 => Ok(vec![vec![C64::new(h, 0.0), C64::new(h, 0.0)], vec![C64::new(h, 0.0), C64::new(-h, 0.0)]]),
        "y" if d == 2 => Ok(qubit_y_vectors()),
        other => Err(ScenarioError::new(path, format!("unknown basis '{other}' for dimension {d}"))),
    }
}

fn build_family(spec: &FamilySpec, d: usize, path: &str) -> SResult<ProjectorFamily> {
    let family = match (&spec.basis, &spec.vectors) {
        (Some(name), None) => {
            let f = named_family(name, d, &format!("{path}.basis"))?;
            match &spec.grouping {
                Some(g) => at(format!("{path}.grouping"), coarse_grain_family(&f, g))?,
                None => f,
            }
        }
        (None, Some(vs)) => {
            let p = format!("{path}.vectors");
            for (k, v) in vs.iter().enumerate() {
                if v.len() != d {
                    return Err(ScenarioError::new(
                        format!("{p}[{k}]"),
                        format!("vector has dimension {}, factor has dimension {d}", v.len()),
                    ));
                }
            }
            let vectors: Vec<Vec<C64>> = vs.iter().map(|v| vector(v)).collect();
            at(p, family_from_basis(&vectors, spec.grouping.as_deref()))?
        }
        _ => {
            return Err(ScenarioError::new(path, "give exactly one of 'basis' and 'vectors'"));
        }
    };
    match &spec.labels {
        Some(labels) => at(format!("{path}.labels"), family.with_labels(labels.clone())),
        None => Ok(family),
    }
}

fn build_reference(spec: &ReferenceJson, dim_env: usize) -> SResult<ReferenceEnvState> {
    let request = match spec {
        ReferenceJson::CompleteIgnorance => ReferenceSpec::CompleteIgnorance { dim_env },
        ReferenceJson::Thermal { beta, h_env } => ReferenceSpec::Thermal {
            h_env: h_env.as_ref().map(|m| matrix(m, "reference.h_env")).transpose()?,
            beta: *beta,
        },
        ReferenceJson::Explicit { matrix: m } => ReferenceSpec::Explicit {
            matrix: matrix(m, "reference.matrix")?,
        },
    };
    let reference = at("reference", histkit::state::reference_env_state(&request))?;
    if reference.dim() != dim_env {
        return Err(ScenarioError::new(
            "reference",
            format!("environment has dimension {dim_env}, reference state has {}", reference.dim()),
        ));
    }
    Ok(reference)
}

/// Model, its Hamiltonian when it has one, environment qubit count, couplings.
type BuiltModel = (Box<dyn Dynamics + Send + Sync>, Option<HamiltonianModel>, Option<usize>, Option<Vec<f64>>);

impl Scenario {
    fn build_model(&self) -> SResult<BuiltModel> {
        match &self.model {
            ModelSpec::CentralSpin {
                n_bath,
                couplings,
                coupling_range,
            } => {
                let g = match (couplings, coupling_range) {
                    (Some(g), None) => g.clone(),
                    (None, Some([lo, hi])) => {
                        let seed = self
                            .seed
                            .ok_or_else(|| ScenarioError::new("seed", "seeded couplings need a seed"))?;
                        if lo.is_nan() || hi.is_nan() || lo > hi {
                            return Err(ScenarioError::new("model.coupling_range", "expected [g_min, g_max] with g_min ≤ g_max"));
                        }
                        seeded_couplings(*n_bath, *lo, *hi, seed)
                    }
                    _ => {
                        return Err(ScenarioError::new("model", "give exactly one of 'couplings' and 'coupling_range'"));
                    }
                };
                let m = at("model", central_spin_dephasing(*n_bath, &g))?;
                Ok((Box::new(m.clone()), Some(m), None, Some(g)))
            }
            ModelSpec::TruncatedOscillator {
                d_sys,
                n_bath,
                d_bath,
                omega,
                bath_omegas,
                couplings,
            } => {
                let m = at(
                    "model",
                    truncated_oscillator_bath(*d_sys, *n_bath, *d_bath, *omega, bath_omegas, couplings),
                )?;
                Ok((Box::new(m.clone()), Some(m), None, Some(couplings.clone())))
            }
            ModelSpec::ThirdPartyTwoSlit { theta } => {
                let m = at("model.theta", third_party_two_slit(*theta))?;
                Ok((Box::new(m), None, None, None))
            }
            ModelSpec::PerfectRecorder { n_env, fresh } => {
                let m = if *fresh {
                    at("model.n_env", recorder_with_mode(*n_env, RecorderMode::FreshPerStep))?
                } else {
                    at("model.n_env", perfect_recorder(*n_env))?
                };
                Ok((Box::new(m), None, Some(*n_env), None))
            }
            ModelSpec::Explicit {
                dims,
                hamiltonian,
                system_factor,
            } => {
                let space = at("model.dims", CompositeSpace::new(dims.clone()))?;
                let h = matrix(hamiltonian, "model.hamiltonian")?;
                let m = at("model", HamiltonianModel::new(h, space, *system_factor, "explicit Hamiltonian"))?;
                Ok((Box::new(m.clone()), Some(m), None, None))
            }
        }
    }

    /// Validates every cross-reference and builds the runnable objects.
    pub fn prepare(&self) -> SResult<Prepared> {
        if self.name.trim().is_empty() {
            return Err(ScenarioError::new("name", "must not be empty"));
        }
        let schedule = at("schedule", Schedule::new(self.schedule.clone()))?;
        let mut seen = BTreeSet::new();
        for (k, c) in self.checks.iter().enumerate() {
            if !seen.insert(*c) {
                return Err(ScenarioError::new(format!("checks[{k}]"), format!("'{}' listed twice", c.name())));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [("eps", t.eps), ("p_floor", t.p_floor), ("jss", t.jss), ("paz_zurek", t.paz_zurek)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScenarioError::new(format!("tolerances.{name}"), "must be a positive number"));
            }
        }
        if self.checks.contains(&Check::Redundancy) && self.seed.is_none() {
            return Err(ScenarioError::new("seed", "the redundancy check samples fragments and needs a seed"));
        }

        let (model, hamiltonian, n_env_qubits, couplings) = self.build_model()?;
        let space = model.space().clone();
        let family_factor = self.family_factor.unwrap_or(model.system_factor());
        let d = at("family_factor", space.factor_dim(family_factor))?;
        let rho = build_state(&self.initial_state, &space, "initial_state")?;

        if self.families.len() != schedule.num_intervals() {
            return Err(ScenarioError::new(
                "families",
                format!("schedule has {} history times, found {} families", schedule.num_intervals(), self.families.len()),
            ));
        }
        let families = self
            .families
            .iter()
            .enumerate()
            .map(|(k, f)| build_family(f, d, &format!("families[{k}]")))
            .collect::<SResult<Vec<_>>>()?;
        let spec = at("families", HistorySetSpec::on_subsystem(schedule.clone(), families, family_factor, rho.clone()))?;
        at("families", spec.history_count())?;

        let dim_env = space.total_dim() / d;
        let reference = build_reference(&self.reference, dim_env)?;

        if self.checks.contains(&Check::Semigroup) && schedule.num_intervals() < 2 {
            return Err(ScenarioError::new("schedule", "the semigroup check needs at least two intervals"));
        }
        if let Some(p) = &self.pointer {
            if let Some(times) = &p.times {
                if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
                    return Err(ScenarioError::new("pointer.times", "need at least one finite time"));
                }
            }
        }
        let prepared = Prepared {
            model,
            hamiltonian,
            n_env_qubits,
            rho,
            schedule,
            spec,
            family_factor,
            reference,
            couplings,
        };
        if self.checks.contains(&Check::Pointer) {
            self.pointer_inputs(&prepared)?;
        }
        if self.checks.contains(&Check::Redundancy) {
            self.fragment_sizes(&prepared)?;
        }
        Ok(prepared)
    }

    /// Candidate bases and initial states for the pointer check.
    pub fn pointer_inputs(&self, p: &Prepared) -> SResult<(Vec<CandidateBasis>, Vec<DensityOperator>, Vec<f64>)> {
        let d = p.spec.subsystem().map_or(p.rho.dim(), |s| s.families[0].dim());
        let spec = self.pointer.clone().unwrap_or_default();
        let bases = if spec.bases.is_empty() {
            if d != 2 {
                return Err(ScenarioError::new("pointer.bases", "default candidates z and x need a qubit system"));
            }
            vec![
                CandidateBasis::new("z", named_vectors("z", 2, "")?),
                CandidateBasis::new("x", named_vectors("x", 2, "")?),
            ]
        } else {
            spec.bases
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let path = format!("pointer.bases[{k}]");
                    let vectors = match (&c.basis, &c.vectors) {
                        (Some(name), None) => named_vectors(name, d, &format!("{path}.basis"))?,
                        (None, Some(vs)) => vs.iter().map(|v| vector(v)).collect(),
                        _ => return Err(ScenarioError::new(path, "give exactly one of 'basis' and 'vectors'")),
                    };
                    Ok(CandidateBasis::new(c.label.clone(), vectors))
                })
                .collect::<SResult<Vec<_>>>()?
        };
        if bases.len() < 2 {
            return Err(ScenarioError::new("pointer.bases", "need at least two candidate bases"));
        }
        let space = p.model.space();
        let states = if spec.initial_states.is_empty() {
            vec![p.rho.clone()]
        } else {
            spec.initial_states
                .iter()
                .enumerate()
                .map(|(k, s)| build_state(s, space, &format!("pointer.initial_states[{k}]")))
                .collect::<SResult<Vec<_>>>()?
        };
        let times = spec.times.unwrap_or_else(|| self.schedule[1..].to_vec());
        Ok((bases, states, times))
    }

    pub fn fragment_sizes(&self, p: &Prepared) -> SResult<Vec<usize>> {
        let n_env = p.model.space().num_factors() - 1;
        let sizes = self
            .redundancy
            .as_ref()
            .and_then(|r| r.fragment_sizes.clone())
            .unwrap_or_else(|| (1..=n_env).collect());
        if let Some(&f) = sizes.iter().find(|&&f| f > n_env) {
            return Err(ScenarioError::new(
                "redundancy.fragment_sizes",
                format!("fragment size {f} exceeds the {n_env} environment factors"),
            ));
        }
        if self.redundancy.as_ref().is_some_and(|r| r.samples == 0) {
            return Err(ScenarioError::new("redundancy.samples", "must be at least 1"));
        }
        Ok(sizes)
    }
}
