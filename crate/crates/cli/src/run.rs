//! Executes a prepared scenario and assembles its report.

use std::collections::BTreeMap;

use histkit::histories::{
    check_both, decoherence_matrix, kolmogorov_report, DecoherenceMatrix, DecoherenceReport, HistorySetSpec, PairDefect,
};
use histkit::models::Schedule;
use histkit::open_systems::{
    jss_k, jss_l, paz_zurek_test, pointer_ranking, redundancy_profile, reduced_evolve_operator, semigroup_deviation,
    subsystem_d_exact, subsystem_d_factored, TimedChannel,
};
use histkit::tensor::partial_trace;
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{Check, Prepared, Scenario, ScenarioError, TolerancesSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported values only.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_defect: Option<f64>,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecoherenceSummary {
    pub histories: usize,
    pub labels: Vec<String>,
    pub names: Vec<String>,
    pub probabilities: Vec<f64>,
    pub max_normalized_offdiag: f64,
    pub max_abs_offdiag: f64,
    pub medium_implies_weak: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub toolkit: String,
    pub seed: Option<u64>,
    pub tolerances: TolerancesSpec,
    pub reference: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub model: String,
    pub dimension: usize,
    pub schedule: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<BTreeMap<String, Value>>,
    pub checks: Vec<CheckResult>,
    pub decoherence: DecoherenceSummary,
    pub provenance: Provenance,
    /// Not serialized: the full matrix goes to CSV and SVG.
    #[serde(skip)]
    pub matrix: Option<DecoherenceMatrix>,
}

impl RunReport {
    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.verdict == Verdict::Fail)
    }
}

/// Failure while running a valid scenario.
#[derive(Debug)]
pub enum RunError {
    Scenario(ScenarioError),
    Numerical { scenario: String, source: histkit::Error },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Scenario(e) => write!(f, "{e}"),
            RunError::Numerical { scenario, source } => write!(f, "scenario '{scenario}': {source}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ScenarioError> for RunError {
    fn from(e: ScenarioError) -> Self {
        RunError::Scenario(e)
    }
}

fn pair_json(spec: &HistorySetSpec, pair: &Option<PairDefect>) -> Value {
    match pair {
        Some(p) => json!({
            "alpha": HistorySetSpec::index_label(&p.alpha),
            "beta": HistorySetSpec::index_label(&p.beta),
            "alpha_name": spec.named_label(&p.alpha),
            "beta_name": spec.named_label(&p.beta),
            "defect": p.defect,
        }),
        None => Value::Null,
    }
}

fn decoherence_check(check: Check, spec: &HistorySetSpec, r: &DecoherenceReport) -> CheckResult {
    CheckResult {
        check: check.name(),
        verdict: if r.passes { Verdict::Pass } else { Verdict::Fail },
        worst_defect: Some(r.max_normalized_defect),
        details: json!({
            "mode": r.mode.to_string(),
            "eps": r.eps,
            "p_floor": r.p_floor,
            "worst_pair": pair_json(spec, &r.worst),
            "checked_pairs": r.checked_pairs,
            "vacuous_pairs": r.vacuous_pairs,
        }),
    }
}

/// Runs every requested check, in the order listed.
pub fn run(scenario: &Scenario) -> Result<RunReport, RunError> {
    let prepared = scenario.prepare()?;
    let num = |source: histkit::Error| RunError::Numerical {
        scenario: scenario.name.clone(),
        source,
    };
    let p = &prepared;
    let props = p.model.propagators(&p.schedule).map_err(num)?;
    let dm = decoherence_matrix(&p.rho, &p.spec, &props).map_err(num)?;
    let tol = &scenario.tolerances;
    let (weak, medium) = check_both(&dm, tol.eps, tol.p_floor).map_err(num)?;

    let mut checks = Vec::with_capacity(scenario.checks.len());
    for &check in &scenario.checks {
        let result = match check {
            Check::Weak => decoherence_check(check, &p.spec, &weak),
            Check::Medium => decoherence_check(check, &p.spec, &medium),
            Check::Kolmogorov => {
                let k = kolmogorov_report(&p.rho, &p.spec, &props, tol.eps).map_err(num)?;
                CheckResult {
                    check: check.name(),
                    verdict: if k.all_hold() { Verdict::Pass } else { Verdict::Fail },
                    worst_defect: Some(k.additivity.value),
                    details: json!({
                        "eps": k.eps,
                        "axiom1_min_probability": k.nonnegativity.value,
                        "axiom1_holds": k.nonnegativity.holds,
                        "axiom2_sum_defect": k.normalization.value,
                        "axiom2_holds": k.normalization.holds,
                        "axiom3_additivity_defect": k.additivity.value,
                        "axiom3_holds": k.additivity.holds,
                        "axiom3_worst_pair": pair_json(&p.spec, &k.worst_additivity_pair),
                    }),
                }
            }
            Check::Jss => jss_check(p, &props, tol).map_err(num)?,
            Check::PazZurek => paz_zurek_check(p, &props, &dm, tol).map_err(num)?,
            Check::Semigroup => semigroup_check(p, &props).map_err(num)?,
            Check::Pointer => pointer_check(scenario, p)?,
            Check::Redundancy => redundancy_check(scenario, p, &props)?,
        };
        checks.push(result);
    }

    let probabilities = dm.probabilities();
    let mut max_abs_offdiag: f64 = 0.0;
    for i in 0..dm.len() {
        for j in 0..dm.len() {
            if i != j {
                max_abs_offdiag = max_abs_offdiag.max(dm.get(i, j).norm());
            }
        }
    }
    Ok(RunReport {
        scenario: scenario.name.clone(),
        model: p.model.description().to_string(),
        dimension: p.rho.dim(),
        schedule: scenario.schedule.clone(),
        sweep: None,
        checks,
        decoherence: DecoherenceSummary {
            histories: dm.len(),
            labels: dm.labels().iter().map(|a| HistorySetSpec::index_label(a)).collect(),
            names: dm.names().to_vec(),
            probabilities,
            max_normalized_offdiag: dm.max_normalized_offdiag(tol.p_floor),
            max_abs_offdiag,
            medium_implies_weak: !medium.passes || weak.passes,
        },
        provenance: Provenance {
            toolkit: format!("histkit {}", env!("CARGO_PKG_VERSION")),
            seed: scenario.seed,
            tolerances: *tol,
            reference: p.reference.kind().to_string(),
            couplings: p.couplings.clone(),
        },
        matrix: Some(dm),
    })
}

/// Decomposition of every interval's reduced evolution, applied to the state at
/// the start of that interval.
fn jss_check(p: &Prepared, props: &histkit::models::PropagatorSet, tol: &TolerancesSpec) -> histkit::Result<CheckResult> {
    let space = p.model.space();
    let keep = [p.family_factor];
    let cumulative = props.cumulative();
    let (mut max_error, mut max_trace_k, mut max_k): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (i, u) in props.steps().iter().enumerate() {
        let a = p.rho.matrix().conjugate_by(&cumulative[i]);
        let l = jss_l(u, &p.reference, space, &keep)?;
        let k = jss_k(u, &a, &p.reference, space, &keep)?;
        let exact = reduced_evolve_operator(&a, u, space, &keep)?;
        let rebuilt = &l.apply(&partial_trace(&a, space, &keep)?)? + &k;
        max_error = max_error.max((&rebuilt - &exact).frobenius_norm());
        max_trace_k = max_trace_k.max(k.trace().norm());
        max_k = max_k.max(k.frobenius_norm());
    }
    let pass = max_error <= tol.jss && max_trace_k <= tol.jss;
    Ok(CheckResult {
        check: Check::Jss.name(),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        worst_defect: Some(max_error),
        details: json!({
            "tol": tol.jss,
            "max_reconstruction_error": max_error,
            "max_trace_k": max_trace_k,
            "max_norm_k": max_k,
            "intervals": props.len(),
        }),
    })
}

fn paz_zurek_check(
    p: &Prepared,
    props: &histkit::models::PropagatorSet,
    dm: &DecoherenceMatrix,
    tol: &TolerancesSpec,
) -> histkit::Result<CheckResult> {
    let report = paz_zurek_test(&p.spec, props, &p.reference, tol.paz_zurek)?;
    let space = p.model.space();
    let keep = [p.family_factor];
    let l_maps = props
        .steps()
        .iter()
        .map(|u| jss_l(u, &p.reference, space, &keep))
        .collect::<histkit::Result<Vec<_>>>()?;
    let rho_s = partial_trace(p.rho.matrix(), space, &keep)?;
    let families = &p.spec.subsystem().expect("scenario families are subsystem families").families;
    let factored = subsystem_d_factored(&rho_s, &l_maps, families)?;
    let exact = subsystem_d_exact(&p.rho, &p.spec, props)?;
    let discrepancy = exact.max_abs_difference(&factored)?;
    let two_paths = exact.max_abs_difference(dm)?;
    let ratio = (report.max_deviation > 0.0).then(|| discrepancy / report.max_deviation);
    log::info!(
        "factored vs exact D: discrepancy {discrepancy:.3e}, max branch deviation {:.3e}, ratio {ratio:?}",
        report.max_deviation
    );
    Ok(CheckResult {
        check: Check::PazZurek.name(),
        verdict: if report.factorizable { Verdict::Pass } else { Verdict::Fail },
        worst_defect: Some(report.max_deviation),
        details: json!({
            "tol": report.tol,
            "reference": report.reference.to_string(),
            "branches": report.branches.len(),
            "max_deviation": report.max_deviation,
            "factored_vs_exact_max_abs": discrepancy,
            "empirical_ratio": ratio,
            "exact_vs_histories_max_abs": two_paths,
        }),
    })
}

/// Semigroup deviation over the first two intervals.
fn semigroup_check(p: &Prepared, props: &histkit::models::PropagatorSet) -> histkit::Result<CheckResult> {
    let space = p.model.space();
    let keep = [p.family_factor];
    let times = props.times();
    let channel = |u: &histkit::ComplexMatrix, a: f64, b: f64| -> histkit::Result<TimedChannel> {
        Ok(TimedChannel::new(jss_l(u, &p.reference, space, &keep)?, p.reference.clone(), (a, b)))
    };
    let first = channel(props.step(0), times[0], times[1])?;
    let second = channel(props.step(1), times[1], times[2])?;
    let total = channel(&props.between(0, 2)?, times[0], times[2])?;
    let deviation = semigroup_deviation(&first, &second, &total)?;
    log::info!("semigroup deviation {deviation:.3e}");
    Ok(CheckResult {
        check: Check::Semigroup.name(),
        verdict: Verdict::Info,
        worst_defect: Some(deviation),
        details: json!({
            "intervals": [[times[0], times[1]], [times[1], times[2]]],
            "deviation": deviation,
            "reference": p.reference.kind().to_string(),
        }),
    })
}

fn pointer_check(scenario: &Scenario, p: &Prepared) -> Result<CheckResult, RunError> {
    let num = |source: histkit::Error| RunError::Numerical {
        scenario: scenario.name.clone(),
        source,
    };
    let (bases, states, times) = scenario.pointer_inputs(p)?;
    let t0 = scenario.schedule[0];
    let mut grid_times = vec![t0];
    grid_times.extend(times.iter().copied());
    let schedule = Schedule::new(grid_times).map_err(|e| ScenarioError::new("pointer.times", e))?;
    let cumulative = p.model.propagators(&schedule).map_err(num)?.cumulative();
    let grid: Vec<_> = times.iter().copied().zip(cumulative.into_iter().skip(1)).collect();
    let report = pointer_ranking(&grid, p.model.space(), &[p.family_factor], &bases, &states, scenario.tolerances.p_floor)
        .map_err(num)?;
    let ranking: Vec<Value> = report
        .ranking
        .iter()
        .map(|s| {
            json!({
                "label": s.label,
                "persistence": s.persistence,
                "drift": s.drift,
                "valid_states": s.valid_states,
            })
        })
        .collect();
    Ok(CheckResult {
        check: Check::Pointer.name(),
        verdict: Verdict::Info,
        worst_defect: None,
        details: json!({
            "ranking": ranking,
            "best": report.ranking[0].label,
            "no_decoherence": report.no_decoherence,
            "times": times,
        }),
    })
}

/// Redundancy of the state at the final schedule time.
fn redundancy_check(scenario: &Scenario, p: &Prepared, props: &histkit::models::PropagatorSet) -> Result<CheckResult, RunError> {
    let num = |source: histkit::Error| RunError::Numerical {
        scenario: scenario.name.clone(),
        source,
    };
    let sizes = scenario.fragment_sizes(p)?;
    let samples = scenario.redundancy.as_ref().map_or(8, |r| r.samples);
    let seed = scenario.seed.expect("validated: redundancy needs a seed");
    let u = props.between(0, props.len()).map_err(num)?;
    let final_state = histkit::state::DensityOperator::new(
        p.rho.matrix().conjugate_by(&u).hermitian_part(),
        p.model.space().clone(),
    )
    .map_err(num)?;
    let profile = redundancy_profile(&final_state, p.family_factor, &sizes, samples, seed).map_err(num)?;
    let points: Vec<Value> = profile
        .points
        .iter()
        .map(|pt| {
            json!({
                "fragment_size": pt.fragment_size,
                "mean_bits": pt.mean_bits,
                "min_bits": pt.min_bits,
                "max_bits": pt.max_bits,
                "samples": pt.samples,
            })
        })
        .collect();
    Ok(CheckResult {
        check: Check::Redundancy.name(),
        verdict: Verdict::Info,
        worst_defect: None,
        details: json!({
            "system_entropy_bits": profile.system_entropy,
            "profile": points,
        }),
    })
}
