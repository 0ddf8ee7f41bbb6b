//! Acceptance suite. One line per criterion; non-zero exit if any fails.
//!
//! Run with `cargo test -p histkit-cli --test acceptance`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use histkit::histories::{
    chain_probability, class_operator, class_operators, coarse_grain_histories, completeness_defect,
    decoherence_matrix, history_probability, interference_term, union_probability, HistorySetSpec, DEFAULT_P_FLOOR,
};
use histkit::models::{
    central_spin_dephasing, perfect_recorder, propagators, recorder_with_mode, seeded_couplings, Dynamics,
    PropagatorSet, RecorderMode, Schedule,
};
use histkit::open_systems::{
    jss_k, jss_l, paz_zurek_test, pointer_ranking, redundancy_profile, reduced_evolve_operator, semigroup_deviation,
    subsystem_d_exact, subsystem_d_factored, CandidateBasis, TimedChannel,
};
use histkit::state::{coarse_grain_family, pure_density, DensityOperator, ProjectorFamily, ReferenceEnvState};
use histkit::tensor::{
    kron, kron_all, kron_vec, partial_trace, random_density, random_hermitian, random_unitary, von_neumann_entropy,
    CompositeSpace, ONE, ZERO,
};
use histkit::{ComplexMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn plus() -> Vec<C64> {
    vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("{what} took {took:.2?}, limit {limit:.0?}"))?;
    Ok(took)
}

// ---------------------------------------------------------------------------
// 1-3: random history sets

struct RandomSet {
    rho: DensityOperator,
    spec: HistorySetSpec,
    props: PropagatorSet,
}

const SPACES: &[&[usize]] = &[
    &[2],
    &[3],
    &[4],
    &[5],
    &[6],
    &[7],
    &[8],
    &[2, 2],
    &[2, 3],
    &[3, 2],
    &[2, 4],
    &[2, 2, 2],
];

fn random_set(seed: u64) -> RandomSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = SPACES[rng.random_range(0..SPACES.len())].to_vec();
    let space = CompositeSpace::new(dims).unwrap();
    let d = space.total_dim();
    let n = rng.random_range(1..=4usize);
    let mut times = vec![0.0];
    for _ in 0..n {
        let last = *times.last().unwrap();
        times.push(last + rng.random_range(0.1..2.0));
    }
    let schedule = Schedule::new(times).unwrap();
    // keep |histories| ≤ 256 so all-pairs checks stay cheap
    let max_blocks = if n <= 2 { d } else { d.min(4) };
    let families = (0..n)
        .map(|_| {
            let fine = ProjectorFamily::computational(d)
                .conjugated(&random_unitary(d, rng.random()))
                .unwrap();
            let k = rng.random_range(1..=max_blocks);
            let mut blocks = vec![Vec::new(); k];
            for i in 0..d {
                blocks[rng.random_range(0..k)].push(i);
            }
            blocks.retain(|b| !b.is_empty());
            coarse_grain_family(&fine, &blocks).unwrap()
        })
        .collect();
    let rho = DensityOperator::new(random_density(d, rng.random()), space).unwrap();
    let steps = (0..n).map(|_| random_unitary(d, rng.random())).collect();
    let props = PropagatorSet::from_steps(&schedule, steps).unwrap();
    let spec = HistorySetSpec::new(schedule, families, rho.clone()).unwrap();
    RandomSet { rho, spec, props }
}

const SCENARIO_SEEDS: std::ops::Range<u64> = 0..100;

fn form_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut histories = 0usize;
    for seed in SCENARIO_SEEDS {
        let s = random_set(seed);
        for alpha in s.spec.histories().map_err(e)? {
            let compact = history_probability(&s.rho, &class_operator(&s.spec, &s.props, &alpha).map_err(e)?).map_err(e)?;
            let chain = chain_probability(&s.rho, &s.spec, &s.props, &alpha).map_err(e)?;
            worst = worst.max((compact - chain).abs());
            histories += 1;
        }
    }
    let took = within(start, Duration::from_secs(10), "100 scenarios")?;
    ensure(worst <= 1e-10, || format!("max |p_chain - p_compact| = {worst:.3e}"))?;
    Ok(format!("{histories} histories, max diff {worst:.2e}, {took:.2?}"))
}

fn completeness() -> Outcome {
    let (mut worst_c, mut worst_p) = (0.0f64, 0.0f64);
    for seed in SCENARIO_SEEDS {
        let s = random_set(seed);
        let classes = class_operators(&s.spec, &s.props).map_err(e)?;
        worst_c = worst_c.max(completeness_defect(&classes));
        let mut total = 0.0;
        for c in &classes {
            total += history_probability(&s.rho, c).map_err(e)?;
        }
        worst_p = worst_p.max((total - 1.0).abs());
    }
    ensure(worst_c <= 1e-10 && worst_p <= 1e-10, || {
        format!("‖ΣC - I‖ = {worst_c:.3e}, |Σp - 1| = {worst_p:.3e}")
    })?;
    Ok(format!("‖ΣC - I‖ ≤ {worst_c:.2e}, |Σp - 1| ≤ {worst_p:.2e}"))
}

fn interference_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    for seed in SCENARIO_SEEDS {
        let s = random_set(seed);
        let classes = class_operators(&s.spec, &s.props).map_err(e)?;
        let d = decoherence_matrix(&s.rho, &s.spec, &s.props).map_err(e)?;
        let p = d.probabilities();
        for i in 0..classes.len() {
            for j in i + 1..classes.len() {
                let union = union_probability(&s.rho, &classes[i], &classes[j]).map_err(e)?;
                let term = interference_term(&d, &classes[i].alpha, &classes[j].alpha).map_err(e)?;
                worst = worst.max((union - p[i] - p[j] - term).abs());
                pairs += 1;
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max identity defect {worst:.3e}"))?;
    Ok(format!("{pairs} pairs, max defect {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 4: two-slit qubit, checked against hand-rolled 2x2 arithmetic

type M2 = [[C64; 2]; 2];

fn m2_mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn m2_adj(a: &M2) -> M2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn m2_proj(v: [C64; 2]) -> M2 {
    [[v[0] * v[0].conj(), v[0] * v[1].conj()], [v[1] * v[0].conj(), v[1] * v[1].conj()]]
}

fn m2_trace(a: &M2) -> C64 {
    a[0][0] + a[1][1]
}

fn two_slit_oracle() -> Outcome {
    let h = c(FRAC_1_SQRT_2);
    let z = [m2_proj([ONE, ZERO]), m2_proj([ZERO, ONE])];
    let x = [m2_proj([h, h]), m2_proj([h, -h])];
    let rho = m2_proj([h, h]);
    // D(a, b) = Tr[C_a† ρ C_b] with C = P_z P_x and U = I
    let class = |zi: usize, xi: usize| m2_mul(&z[zi], &x[xi]);
    let oracle_d = |a: (usize, usize), b: (usize, usize)| {
        m2_trace(&m2_mul(&m2_mul(&m2_adj(&class(a.0, a.1)), &rho), &class(b.0, b.1)))
    };
    let oracle_p0 = oracle_d((0, 0), (0, 0)).re;
    let oracle_p1 = oracle_d((1, 0), (1, 0)).re;
    let oracle_term = 2.0 * oracle_d((0, 0), (1, 0)).re;

    let rho_lib = pure_density(&plus()).map_err(e)?;
    let schedule = Schedule::new(vec![0.0, 1.0, 2.0]).map_err(e)?;
    let props = PropagatorSet::from_steps(&schedule, vec![ComplexMatrix::identity(2); 2]).map_err(e)?;
    let families = vec![ProjectorFamily::computational(2), ProjectorFamily::qubit_x()];
    let spec = HistorySetSpec::new(schedule, families, rho_lib.clone()).map_err(e)?;
    let d = decoherence_matrix(&rho_lib, &spec, &props).map_err(e)?;
    let at = |a: &[usize]| d.index_of(a).ok_or_else(|| format!("missing history {a:?}"));
    let p0 = d.get(at(&[0, 0])?, at(&[0, 0])?).re;
    let p1 = d.get(at(&[1, 0])?, at(&[1, 0])?).re;
    let term = interference_term(&d, &[0, 0], &[1, 0]).map_err(e)?;
    let coarse = coarse_grain_histories(&spec, &[vec![vec![0, 1]], vec![vec![0], vec![1]]]).map_err(e)?;
    let dc = decoherence_matrix(&rho_lib, &coarse, &props).map_err(e)?;
    let p_plus = dc.get(0, 0).re;

    let checks = [
        ("p(z0,x+) oracle", oracle_p0, 0.25),
        ("p(z1,x+) oracle", oracle_p1, 0.25),
        ("interference oracle", oracle_term, 0.5),
        ("p(z0,x+)", p0, oracle_p0),
        ("p(z1,x+)", p1, oracle_p1),
        ("interference", term, oracle_term),
        ("coarse p(x+)", p_plus, 1.0),
    ];
    for (what, got, want) in checks {
        ensure((got - want).abs() <= 1e-12, || format!("{what} = {got}, expected {want}"))?;
    }
    Ok(format!("p = {p0:.15}, {p1:.15}; 2 Re D = {term:.15}; p(x+) = {p_plus:.15}"))
}

// ---------------------------------------------------------------------------
// 5: recorder

fn recorder_medium() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut runs = Vec::new();
    for n_env in [1usize, 2, 4] {
        for mode in [RecorderMode::CopyAll, RecorderMode::FreshPerStep] {
            let rec = recorder_with_mode(n_env, mode).map_err(e)?;
            let intervals = if mode == RecorderMode::CopyAll { 1 } else { n_env };
            let schedule = Schedule::uniform(0.0, 1.0, intervals).map_err(e)?;
            let rho = rec.initial_state(&pure_density(&plus()).map_err(e)?).map_err(e)?;
            let props = propagators(&rec, &schedule).map_err(e)?;
            let families = vec![ProjectorFamily::computational(2); intervals];
            let spec = HistorySetSpec::on_subsystem(schedule, families, 0, rho.clone()).map_err(e)?;
            let d = decoherence_matrix(&rho, &spec, &props).map_err(e)?;
            let defect = d.max_normalized_offdiag(DEFAULT_P_FLOOR);
            worst = worst.max(defect);
            runs.push(format!("{n_env}/{mode}"));
        }
    }
    let took = within(start, Duration::from_secs(1), "recorder runs")?;
    ensure(worst <= 1e-10, || format!("max normalized off-diagonal {worst:.3e}"))?;
    Ok(format!("{} runs, max normalized |D| {worst:.2e}, {took:.2?}", runs.len()))
}

// ---------------------------------------------------------------------------
// 6: linear + affine decomposition of reduced evolution

fn reference(kind: usize, de: usize, seed: u64) -> ReferenceEnvState {
    match kind {
        0 => ReferenceEnvState::complete_ignorance(de),
        1 => ReferenceEnvState::thermal(&random_hermitian(de, seed), 1.0).unwrap(),
        _ => ReferenceEnvState::explicit(random_density(de, seed)).unwrap(),
    }
}

fn jss_exactness() -> Outcome {
    let start = Instant::now();
    let dims = [(2usize, 2usize), (2, 4), (3, 3), (4, 8)];
    let (mut worst, mut worst_trace, mut worst_zero) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..200u64 {
        let (ds, de) = dims[i as usize % 4];
        let kind = (i as usize / 4) % 3;
        let space = CompositeSpace::new(vec![ds, de]).map_err(e)?;
        let n = ds * de;
        let seed = 1000 + 7 * i;
        let u = random_unitary(n, seed);
        let rho = random_density(n, seed + 1);
        let omega = reference(kind, de, seed + 2);
        let l = jss_l(&u, &omega, &space, &[0]).map_err(e)?;
        let k = jss_k(&u, &rho, &omega, &space, &[0]).map_err(e)?;
        let exact = reduced_evolve_operator(&rho, &u, &space, &[0]).map_err(e)?;
        let rebuilt = &l.apply(&partial_trace(&rho, &space, &[0]).map_err(e)?).map_err(e)? + &k;
        worst = worst.max((&rebuilt - &exact).frobenius_norm());
        worst_trace = worst_trace.max(k.trace().norm());

        let product = kron(&random_density(ds, seed + 3), omega.matrix());
        let k_product = jss_k(&u, &product, &omega, &space, &[0]).map_err(e)?;
        let local = kron(&random_unitary(ds, seed + 4), &random_unitary(de, seed + 5));
        let k_local = jss_k(&local, &rho, &omega, &space, &[0]).map_err(e)?;
        worst_zero = worst_zero.max(k_product.max_abs()).max(k_local.max_abs());
    }
    let took = within(start, Duration::from_secs(30), "200 triples")?;
    ensure(worst <= 1e-10, || format!("reconstruction error {worst:.3e}"))?;
    ensure(worst_trace <= 1e-10, || format!("|Tr K| = {worst_trace:.3e}"))?;
    ensure(worst_zero <= 1e-12, || format!("K on product state or local unitary = {worst_zero:.3e}"))?;
    Ok(format!(
        "200 triples, error {worst:.2e}, |Tr K| {worst_trace:.2e}, trivial K {worst_zero:.2e}, {took:.2?}"
    ))
}

// ---------------------------------------------------------------------------
// 7: central-spin dephasing against brute force and the product formula

fn central_spin_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (n, seed) in [(1usize, 3u64), (4, 5), (8, 7)] {
        let g = seeded_couplings(n, 0.1, 1.0, seed);
        let model = central_spin_dephasing(n, &g).map_err(e)?;
        let spectrum = model.spectrum().map_err(e)?;
        let space = model.space().clone();
        let psi0 = (0..=n).fold(vec![ONE], |acc, _| kron_vec(&acc, &plus()));
        // joint z basis: system bit most significant, then bath spins in order
        let dim = 1usize << (n + 1);
        let energy = |idx: usize| -> f64 {
            let s = if idx >> n & 1 == 0 { 1.0 } else { -1.0 };
            (0..n).map(|k| g[k] * s * if idx >> (n - 1 - k) & 1 == 0 { 1.0 } else { -1.0 }).sum()
        };
        let rho01_0 = 0.5;
        for step in 0..50 {
            let t = 0.1 * step as f64;
            let psi = spectrum.evolve_vector(t, &psi0);
            let rho_s = partial_trace(&ComplexMatrix::outer(&psi, &psi), &space, &[0]).map_err(e)?;
            let library = rho_s.get(0, 1).norm();
            let half = dim / 2;
            let brute: C64 = (0..half)
                .map(|env| {
                    let a = psi0[env] * C64::from_polar(1.0, -energy(env) * t);
                    let b = psi0[half + env] * C64::from_polar(1.0, -energy(half + env) * t);
                    a * b.conj()
                })
                .sum();
            let formula = rho01_0 * g.iter().map(|gk| (2.0 * gk * t).cos().abs()).product::<f64>();
            worst = worst.max((library - formula).abs()).max((brute.norm() - formula).abs());
        }
    }
    let took = within(start, Duration::from_secs(30), "dephasing grid")?;
    ensure(worst <= 1e-8, || format!("max |ρ01| mismatch {worst:.3e}"))?;
    Ok(format!("N ∈ {{1, 4, 8}}, 50 times each, max mismatch {worst:.2e}, {took:.2?}"))
}

// ---------------------------------------------------------------------------
// 8: factorization of the subsystem chain

fn cnot_env_to_system() -> ComplexMatrix {
    // |s, e⟩ → |s ⊕ e, e⟩, index 2 s + e
    let mut m = ComplexMatrix::zeros(4, 4);
    for s in 0..2 {
        for env in 0..2 {
            m[(2 * (s ^ env) + env, 2 * s + env)] = ONE;
        }
    }
    m
}

fn factored_vs_exact(spec: &HistorySetSpec, props: &PropagatorSet, omega: &ReferenceEnvState) -> Result<f64, String> {
    let sub = spec.subsystem().ok_or("spec is not on a subsystem")?;
    let keep = [sub.factor];
    let l_maps = props
        .steps()
        .iter()
        .map(|u| jss_l(u, omega, &sub.space, &keep))
        .collect::<histkit::Result<Vec<_>>>()
        .map_err(e)?;
    let rho = spec.initial_state();
    let rho_s = partial_trace(rho.matrix(), rho.space(), &keep).map_err(e)?;
    let factored = subsystem_d_factored(&rho_s, &l_maps, &sub.families).map_err(e)?;
    let exact = subsystem_d_exact(rho, spec, props).map_err(e)?;
    factored.max_abs_difference(&exact).map_err(e)
}

fn paz_zurek() -> Outcome {
    let rec = recorder_with_mode(2, RecorderMode::FreshPerStep).map_err(e)?;
    let schedule = Schedule::uniform(0.0, 1.0, 2).map_err(e)?;
    let rho = rec.initial_state(&pure_density(&plus()).map_err(e)?).map_err(e)?;
    let props = propagators(&rec, &schedule).map_err(e)?;
    let spec = HistorySetSpec::on_subsystem(schedule, vec![ProjectorFamily::computational(2); 2], 0, rho)
        .map_err(e)?;
    let omega = ReferenceEnvState::complete_ignorance(4);
    let fresh = paz_zurek_test(&spec, &props, &omega, 1e-10).map_err(e)?;
    let fresh_gap = factored_vs_exact(&spec, &props, &omega)?;
    ensure(fresh.factorizable, || format!("fresh recorder deviation {:.3e}", fresh.max_deviation))?;
    ensure(fresh_gap <= 1e-10, || format!("fresh recorder factored vs exact {fresh_gap:.3e}"))?;

    let space = CompositeSpace::qubits(2).map_err(e)?;
    let bell = [c(FRAC_1_SQRT_2), ZERO, ZERO, c(FRAC_1_SQRT_2)];
    let rho = DensityOperator::new(ComplexMatrix::outer(&bell, &bell), space).map_err(e)?;
    let schedule = Schedule::uniform(0.0, 1.0, 1).map_err(e)?;
    let props = PropagatorSet::from_steps(&schedule, vec![cnot_env_to_system()]).map_err(e)?;
    let spec = HistorySetSpec::on_subsystem(schedule, vec![ProjectorFamily::computational(2)], 0, rho).map_err(e)?;
    let omega = ReferenceEnvState::complete_ignorance(2);
    let entangled = paz_zurek_test(&spec, &props, &omega, 1e-10).map_err(e)?;
    let entangled_gap = factored_vs_exact(&spec, &props, &omega)?;
    ensure(entangled.max_deviation > 0.1, || {
        format!("counterexample deviation only {:.3e}", entangled.max_deviation)
    })?;
    ensure(entangled_gap > 1e-3, || format!("counterexample discrepancy only {entangled_gap:.3e}"))?;
    Ok(format!(
        "fresh: deviation {:.2e}, gap {fresh_gap:.2e}; entangled: deviation {:.3}, gap {entangled_gap:.3}",
        fresh.max_deviation, entangled.max_deviation
    ))
}

// ---------------------------------------------------------------------------
// 9: semigroup

fn composed_deviation(h: &ComplexMatrix, space: &CompositeSpace, omega: &ReferenceEnvState, t: f64) -> Result<f64, String> {
    let ch = |a: f64, b: f64| TimedChannel::from_hamiltonian(h, space, &[0], omega, (a, b)).map_err(e);
    semigroup_deviation(&ch(0.0, t)?, &ch(t, 2.0 * t)?, &ch(0.0, 2.0 * t)?).map_err(e)
}

fn semigroup() -> Outcome {
    let space = CompositeSpace::new(vec![2, 3]).map_err(e)?;
    let h = &kron(&random_hermitian(2, 21), &ComplexMatrix::identity(3))
        + &kron(&ComplexMatrix::identity(2), &random_hermitian(3, 22));
    let mut product = 0.0f64;
    for omega in [
        ReferenceEnvState::complete_ignorance(3),
        ReferenceEnvState::thermal(&random_hermitian(3, 23), 1.0).map_err(e)?,
    ] {
        product = product.max(composed_deviation(&h, &space, &omega, 0.7)?);
    }
    ensure(product <= 1e-10, || format!("product model deviation {product:.3e}"))?;

    let g = seeded_couplings(3, 0.2, 1.0, 24);
    let model = central_spin_dephasing(3, &g).map_err(e)?;
    let omega = ReferenceEnvState::complete_ignorance(8);
    let coupled = composed_deviation(model.hamiltonian(), model.space(), &omega, 0.7)?;
    ensure(coupled > 1e-6, || format!("central spin deviation only {coupled:.3e}"))?;
    Ok(format!("product {product:.2e}; central spin {coupled:.6e}"))
}

// ---------------------------------------------------------------------------
// 10: pointer ranking

fn pointer_states(n: usize) -> Result<Vec<DensityOperator>, String> {
    let h = FRAC_1_SQRT_2;
    let systems = [
        vec![c(h), c(h)],
        vec![ONE, ZERO],
        vec![c(h), C64::new(0.0, h)],
    ];
    let space = CompositeSpace::qubits(n + 1).map_err(e)?;
    systems
        .iter()
        .map(|s| {
            let psi = (0..n).fold(s.clone(), |acc, _| kron_vec(&acc, &plus()));
            DensityOperator::new(ComplexMatrix::outer(&psi, &psi), space.clone()).map_err(e)
        })
        .collect()
}

fn pointer() -> Outcome {
    let h = FRAC_1_SQRT_2;
    let candidates = vec![
        CandidateBasis::new("x", vec![vec![c(h), c(h)], vec![c(h), c(-h)]]),
        CandidateBasis::new("z", vec![vec![ONE, ZERO], vec![ZERO, ONE]]),
    ];
    let times: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let n = 3;
    let states = pointer_states(n)?;
    let mut margins = Vec::new();
    for seed in 0..10u64 {
        let model = central_spin_dephasing(n, &seeded_couplings(n, 0.2, 1.0, seed)).map_err(e)?;
        let grid = model.evolution_grid(&times).map_err(e)?;
        let report = pointer_ranking(&grid, model.space(), &[0], &candidates, &states, DEFAULT_P_FLOOR).map_err(e)?;
        let first = &report.ranking[0];
        ensure(first.label == "z", || format!("seed {seed}: '{}' ranked first", first.label))?;
        let persistence = |k: usize| report.ranking[k].persistence.unwrap_or(f64::INFINITY);
        margins.push(persistence(1) - persistence(0));
    }

    let decoupled = central_spin_dephasing(n, &vec![0.0; n]).map_err(e)?;
    let grid = decoupled.evolution_grid(&times).map_err(e)?;
    let report = pointer_ranking(&grid, decoupled.space(), &[0], &candidates, &states, DEFAULT_P_FLOOR).map_err(e)?;
    let (a, b) = (&report.ranking[0], &report.ranking[1]);
    let tie = match (a.persistence, b.persistence) {
        (Some(pa), Some(pb)) => (pa - pb).abs() <= 1e-12 && (a.drift - b.drift).abs() <= 1e-12,
        _ => false,
    };
    ensure(report.no_decoherence && tie, || {
        format!("decoupled model not a tie: {:?}", report.ranking)
    })?;
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("z first for 10 seeds (min persistence margin {min_margin:.3}); decoupled tie"))
}

// ---------------------------------------------------------------------------
// 11: redundancy

fn redundancy() -> Outcome {
    let mut worst = 0.0f64;
    for n_env in [2usize, 3, 4, 6] {
        let rec = perfect_recorder(n_env).map_err(e)?;
        let initial = rec.initial_state(&pure_density(&plus()).map_err(e)?).map_err(e)?;
        let ghz = DensityOperator::new(initial.matrix().conjugate_by(&rec.step(0).map_err(e)?), initial.space().clone())
            .map_err(e)?;
        let zeros = vec![ONE, ZERO];
        let ones = vec![ZERO, ONE];
        let branch = |v: &Vec<C64>| kron_all(std::iter::repeat_n(&ComplexMatrix::from_columns(std::slice::from_ref(v)).unwrap(), n_env + 1));
        let explicit = (&branch(&zeros) + &branch(&ones)).scale_real(FRAC_1_SQRT_2);
        let explicit = ComplexMatrix::outer(&explicit.column(0), &explicit.column(0));
        ensure((ghz.matrix() - &explicit).max_abs() <= 1e-14, || "recorder output is not GHZ".into())?;

        let sizes: Vec<usize> = (1..=n_env).collect();
        let profile = redundancy_profile(&ghz, 0, &sizes, 6, 31 + n_env as u64).map_err(e)?;
        let s_sys = von_neumann_entropy(&partial_trace(ghz.matrix(), ghz.space(), &[0]).map_err(e)?).map_err(e)?;
        for p in &profile.points {
            let want = if p.fragment_size < n_env { 1.0 } else { 2.0 * s_sys };
            let off = (p.min_bits - want).abs().max((p.max_bits - want).abs());
            ensure(off <= 1e-8, || format!("n_env {n_env}, f {}: {} bits, expected {want}", p.fragment_size, p.mean_bits))?;
            worst = worst.max(off);
        }
    }
    Ok(format!("plateau 1 bit, full environment 2 S(ρ_S); max error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 12: CLI determinism

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run_cli(scenario: &Path, out: &Path, threads: usize) -> Result<(i32, Vec<u8>), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_histkit"))
        .arg("run")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .env_remove("HISTKIT_THREADS")
        .output()
        .map_err(e)?;
    let code = status.status.code().ok_or("killed by signal")?;
    let stem = scenario.file_stem().unwrap().to_string_lossy().into_owned();
    let json = std::fs::read(out.join(format!("{stem}.json"))).map_err(|err| format!("{stem}: {err}"))?;
    Ok((code, json))
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e)?;
    let mut codes = Vec::new();
    for (name, expected) in [("recorder", 0), ("central_spin", 0), ("two_slit", 1)] {
        let file = scenario_dir().join(format!("{name}.json"));
        let (c1, a) = run_cli(&file, &tmp.path().join("a"), 1)?;
        let (c2, b) = run_cli(&file, &tmp.path().join("b"), 1)?;
        let (c8, d) = run_cli(&file, &tmp.path().join("c"), 8)?;
        ensure(a == b, || format!("{name}: reports differ between invocations"))?;
        ensure(a == d, || format!("{name}: reports differ between 1 and 8 threads"))?;
        ensure(c1 == expected && c2 == expected && c8 == expected, || {
            format!("{name}: exit codes {c1}/{c2}/{c8}, expected {expected}")
        })?;
        codes.push(format!("{name}={c1}"));
    }
    Ok(format!("byte-identical reports; exit codes {}", codes.join(", ")))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("form equivalence", form_equivalence),
        ("completeness and normalization", completeness),
        ("interference identity", interference_identity),
        ("two-slit qubit oracle", two_slit_oracle),
        ("recorder medium decoherence", recorder_medium),
        ("linear + affine decomposition", jss_exactness),
        ("central-spin dephasing oracle", central_spin_oracle),
        ("factorization discrimination", paz_zurek),
        ("semigroup", semigroup),
        ("pointer ranking", pointer),
        ("redundancy plateau", redundancy),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
