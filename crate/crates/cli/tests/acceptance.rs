//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use olpi_cli::config::{bundled_config, DomainParams, BUNDLED_CONFIGS};
use olpi_cli::run::{run_experiment, RunOptions};
use olpi_core::drone::{bundled_scenario, heuristic_base_policy, run_drone, DroneProblem, BUNDLED};
use olpi_core::exact::{exact_policy_iteration, solve_dp, EnumerableProblem};
use olpi_core::generators::{
    check_consistency, Generator, OverlayGenerator, OverrideGenerator, ResidualGenerator,
    TabularGenerator,
};
use olpi_core::graph::{GraphProblem, GraphSpec, RandomGraphParams};
use olpi_core::mda::{
    hungarian_2d_assignment, mda_improvement_sweep, random_instance, run_mda, MdaInstance,
    MdaProblem,
};
use olpi_core::model::{
    policy_cost_to_go, rollout_policy, same_trajectory, ControlBounds, ControlProblem, FnPolicy,
    Policy, SharedPolicy,
};
use olpi_core::online::{
    improve_trajectory, multiagent_minimize, run_online_pi, CoordinateOrder, FullControlSet,
    MultiagentConfig, MultiagentControlSet, OnlineOptions,
};
use olpi_core::{par, rng};

/// Relative slack for drone cost comparisons.
const DRONE_SLACK: f64 = 1e-9;
/// Oracle agreement for DP tables.
const TABLE_TOL: f64 = 1e-9;
/// Hungarian and coordinate-descent agreement.
const ASSIGN_TOL: f64 = 1e-12;
const DRONE_SEEDS: u64 = 10;
const DRONE_ITERATIONS: usize = 4;
const MDA_MAX_ITERS: usize = 20;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(budget_s: u64, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= Duration::from_secs(budget_s), || {
        format!("runtime {:.1}s over the {budget_s}s budget", t.as_secs_f64())
    })
}

// Test-side oracles.

/// All permutations of 0..m by Heap's algorithm.
fn heap_permutations(m: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..m).collect();
    let mut c = vec![0; m];
    let mut out = vec![a.clone()];
    let mut i = 1;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Exhaustive MDA optimum: every sequence of N perfect matchings.
fn mda_optimum(inst: &MdaInstance) -> f64 {
    let (n, m) = (inst.stages(), inst.width());
    let perms = heap_permutations(m);
    fn go(inst: &MdaInstance, perms: &[Vec<usize>], paths: &mut Vec<Vec<usize>>, left: usize) -> f64 {
        if left == 0 {
            return paths.iter().map(|t| inst.grouping_cost(t)).sum();
        }
        let mut best = f64::INFINITY;
        for p in perms {
            for t in paths.iter_mut() {
                let last = *t.last().unwrap();
                t.push(p[last]);
            }
            best = best.min(go(inst, perms, paths, left - 1));
            for t in paths.iter_mut() {
                t.pop();
            }
        }
        best
    }
    let mut paths: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    go(inst, &perms, &mut paths, n)
}

/// Backward DP straight from the arc list.
fn graph_dp(spec: &GraphSpec) -> Vec<HashMap<String, f64>> {
    let n = spec.horizon;
    let mut j: Vec<HashMap<String, f64>> = vec![HashMap::new(); n + 1];
    for a in spec.arcs.iter().filter(|a| a.stage + 1 == n) {
        j[n].insert(a.to.clone(), *spec.terminal.get(&a.to).unwrap_or(&0.0));
    }
    for k in (0..n).rev() {
        let mut next = HashMap::new();
        for a in spec.arcs.iter().filter(|a| a.stage == k) {
            if let Some(&tail) = j[k + 1].get(&a.to) {
                let v = a.cost + tail;
                let e = next.entry(a.from.clone()).or_insert(f64::INFINITY);
                if v < *e {
                    *e = v;
                }
            }
        }
        j[k] = next;
    }
    j
}

fn first_control(g: &GraphProblem) -> SharedPolicy<GraphProblem> {
    let g = g.clone();
    Arc::new(FnPolicy::new(move |k, x: &String| {
        g.controls(k, x).and_then(|c| c.into_iter().next())
    }))
}

fn small_mda_instances() -> Vec<(u64, MdaProblem)> {
    (0..50u64)
        .map(|seed| {
            let n = 3 + (seed as usize % 3);
            let m = 3 + (seed as usize / 3 % 2);
            let inst = random_instance(n, m, 1000 + seed).unwrap().materialize().unwrap();
            (seed, MdaProblem::new(inst))
        })
        .collect()
}

// Criteria.

fn monotone_improvement() -> Outcome {
    let start = Instant::now();
    let mda = small_mda_instances();
    let bad: Vec<String> = par::map(&mda, |(seed, p)| {
        let h = run_mda(p, &p.random_trajectory(*seed), MDA_MAX_ITERS, *seed).unwrap();
        let c = h.costs();
        (!c.windows(2).all(|w| w[1] <= w[0])).then(|| format!("mda seed {seed}: {c:?}"))
    })
    .into_iter()
    .flatten()
    .collect();
    ensure(bad.is_empty(), || bad.join("; "))?;

    let jobs: Vec<(&str, u64)> = BUNDLED
        .iter()
        .flat_map(|(name, _)| (0..DRONE_SEEDS).map(move |s| (*name, s)))
        .collect();
    let bad: Vec<String> = par::map(&jobs, |(name, seed)| {
        let p = DroneProblem::new(bundled_scenario(name).unwrap()).unwrap();
        let h = run_drone(&p, CoordinateOrder::Ascending, DRONE_ITERATIONS, *seed).unwrap();
        let c = h.costs();
        let ok = c.len() == DRONE_ITERATIONS + 1
            && c.windows(2).all(|w| w[1] <= w[0] + DRONE_SLACK * w[0].abs().max(1.0));
        (!ok).then(|| format!("{name} seed {seed}: {c:?}"))
    })
    .into_iter()
    .flatten()
    .collect();
    ensure(bad.is_empty(), || bad.join("; "))?;
    within(300, start)?;
    Ok(format!(
        "{} MDA runs exact, {} drone runs within {DRONE_SLACK:e} relative",
        mda.len(),
        jobs.len()
    ))
}

fn fixed_point() -> Outcome {
    let mda = small_mda_instances();
    let bad: Vec<String> = par::map(&mda, |(seed, p)| {
        let h = run_mda(p, &p.random_trajectory(*seed), MDA_MAX_ITERS, *seed).unwrap();
        let c = h.costs();
        let Some(l) = (1..c.len()).find(|&l| c[l] == c[l - 1]) else {
            return Some(format!("seed {seed}: no repeated cost in {c:?}"));
        };
        if h.converged_at != Some(l) || h.entries.len() != l + 1 {
            return Some(format!("seed {seed}: repeat at {l}, halted at {:?}", h.converged_at));
        }
        let (a, b) = (&h.entries[l].trajectory, &h.entries[l - 1].trajectory);
        if !same_trajectory(p, a, b) {
            return Some(format!("seed {seed}: trajectories differ at the repeat"));
        }
        let again = mda_improvement_sweep(p, a).unwrap();
        (!same_trajectory(p, &again, a)).then(|| format!("seed {seed}: sweep moved the fixed point"))
    })
    .into_iter()
    .flatten()
    .collect();
    ensure(bad.is_empty(), || bad.join("; "))?;
    Ok(format!("{} runs halt at the first repeated cost", mda.len()))
}

fn oracle_optimality() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let horizon = 1 + (seed as usize % 5);
        let g = GraphProblem::random(
            &RandomGraphParams {
                horizon,
                max_states: 6,
                max_controls: 4,
                integer_costs: seed % 2 == 1,
            },
            seed,
        );
        let oracle = graph_dp(g.spec());
        let ep = EnumerableProblem::reachable(&g, g.initial_state()).unwrap();
        let (dp, _) = solve_dp(&ep).unwrap();
        let records = exact_policy_iteration(&ep, &first_control(&g), horizon).unwrap();
        let gap = |table: &olpi_core::model::CostToGoTable| {
            let mut d = 0.0f64;
            for (k, states) in ep.states.iter().enumerate() {
                for x in states {
                    let v = table.value(&g, k, x).unwrap_or(f64::INFINITY);
                    d = d.max((v - oracle[k][x]).abs());
                }
            }
            d
        };
        let dp_gap = gap(&dp);
        ensure(dp_gap <= TABLE_TOL, || format!("seed {seed}: solve_dp off by {dp_gap}"))?;
        let reached = records.iter().position(|r| gap(&r.table) <= TABLE_TOL);
        ensure(reached.is_some_and(|r| r <= horizon), || {
            format!("seed {seed}: PI reached the optimum at {reached:?}, N = {horizon}")
        })?;
        worst = worst.max(gap(&records.last().unwrap().table));
    }
    within(60, start)?;
    Ok(format!("20 instances, worst final deviation {worst:e}"))
}

fn counterexample_base() -> SharedPolicy<GraphProblem> {
    Arc::new(FnPolicy::new(|_k, x: &String| {
        Some(if x == "x0" { "u0" } else if x == "x1" { "u1" } else { "u1'" }.to_string())
    }))
}

fn counterexample() -> Outcome {
    let g = GraphProblem::two_stage_counterexample();
    let x0 = g.initial_state();
    let optimum = graph_dp(g.spec())[0][&x0];
    let ep = EnumerableProblem::reachable(&g, x0.clone()).unwrap();
    let dp = solve_dp(&ep).unwrap().0.value(&g, 0, &x0);
    ensure(optimum == 15.0 && dp == Some(15.0), || format!("optimum {optimum}, dp {dp:?}"))?;
    let base = counterexample_base();
    let j0 = policy_cost_to_go(&g, &base, &x0, 0).unwrap();
    ensure(j0 == 20.0, || format!("base cost {j0}"))?;

    let good = run_online_pi(
        &g,
        &x0,
        base.clone(),
        &OverlayGenerator::new(base.clone()),
        &FullControlSet,
        &OnlineOptions::default(),
    )
    .unwrap();
    ensure(good.costs() == [20.0, 15.0, 15.0] && good.converged_at == Some(2), || {
        format!("consistent run {:?}", good.costs())
    })?;

    let bad_gen = OverrideGenerator::new(
        OverlayGenerator::new(base.clone()),
        vec![(1, "x1'".to_string(), "u1''".to_string())],
    );
    let strict = run_online_pi(&g, &x0, base.clone(), &bad_gen, &FullControlSet, &OnlineOptions::default());
    ensure(
        matches!(strict, Err(olpi_core::Error::ConsistencyViolation { stage: 1, .. })),
        || format!("strict run returned {:?}", strict.map(|h| h.costs())),
    )?;
    let opts = OnlineOptions {
        allow_inconsistent: true,
        ..OnlineOptions::default()
    };
    let bad = run_online_pi(&g, &x0, base, &bad_gen, &FullControlSet, &opts).unwrap();
    let c = bad.costs();
    ensure(c[1] == 25.0 && bad.entries[1].improvement_violation, || {
        format!("inconsistent run {c:?}")
    })?;
    Ok(format!("J* = 15, J0 = 20, consistent {:?}, inconsistent {c:?} flagged", good.costs()))
}

fn mda_gap_behavior() -> Outcome {
    let start = Instant::now();
    let mda = small_mda_instances();
    let rows: Vec<Result<bool, String>> = par::map(&mda, |(seed, p)| {
        let optimum = mda_optimum(p.instance());
        let h = run_mda(p, &p.random_trajectory(*seed), MDA_MAX_ITERS, *seed).unwrap();
        let c = h.costs();
        if c.iter().any(|&v| v < optimum - ASSIGN_TOL * optimum.max(1.0)) {
            return Err(format!("seed {seed}: cost below the optimum {optimum}"));
        }
        let gap = |v: f64| (v - optimum) / optimum;
        if gap(*c.last().unwrap()) > gap(c[0]) {
            return Err(format!("seed {seed}: final gap above the initial gap"));
        }
        let limit = 6.max(p.instance().stages());
        Ok(h.converged_at.is_some_and(|l| l <= limit))
    });
    let mut converged = 0;
    for r in rows {
        converged += usize::from(r?);
    }
    ensure(converged * 10 >= mda.len() * 9, || {
        format!("{converged}/{} converged within max(6, N)", mda.len())
    })?;
    within(180, start)?;
    Ok(format!(
        "{converged}/{} converged within max(6, N); final gap <= initial gap on all",
        mda.len()
    ))
}

fn large_mda() -> Outcome {
    let start = Instant::now();
    let mut ratios = Vec::new();
    for i in 0..10u64 {
        let n = 8 + (i as usize % 5);
        let m = 3 + (i as usize % 4);
        let p = MdaProblem::new(random_instance(n, m, 5000 + i).unwrap());
        let h = run_mda(&p, &p.random_trajectory(i), 10, i).unwrap();
        let c = h.costs();
        ensure(c.iter().all(|&v| v / c[0] <= 1.0), || format!("N={n} m={m}: {c:?}"))?;
        let r = c.last().unwrap() / c[0];
        ensure(r < 1.0, || format!("N={n} m={m}: no reduction"))?;
        ratios.push(r);
    }
    within(120, start)?;
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    Ok(format!("10 instances reduced, worst final ratio {worst:.3}"))
}

/// x_{k+1} = x_k + u_k on R^2 with box controls and a separable cost.
struct PlaneToy {
    bounds: ControlBounds,
    target: [f64; 2],
}

impl ControlProblem for PlaneToy {
    type State = Vec<f64>;
    type Control = Vec<f64>;

    fn horizon(&self) -> usize {
        3
    }

    fn step(&self, _k: usize, x: &Vec<f64>, u: &Vec<f64>) -> Vec<f64> {
        vec![x[0] + u[0], x[1] + u[1]]
    }

    fn stage_cost(&self, _k: usize, _x: &Vec<f64>, u: &Vec<f64>) -> f64 {
        0.1 * (u[0] * u[0] + u[1] * u[1])
    }

    fn terminal_cost(&self, x: &Vec<f64>) -> f64 {
        (x[0] - self.target[0]).powi(2) + (x[1] - self.target[1]).powi(2)
    }

    fn admits(&self, _k: usize, _x: &Vec<f64>, u: &Vec<f64>) -> bool {
        self.bounds.contains(u)
    }

    fn controls(&self, _k: usize, _x: &Vec<f64>) -> Option<Vec<Vec<f64>>> {
        None
    }

    fn control_bounds(&self, _k: usize, _x: &Vec<f64>) -> Option<ControlBounds> {
        Some(self.bounds.clone())
    }

    fn encode_state(&self, x: &Vec<f64>) -> Vec<u8> {
        x.iter().flat_map(|v| v.to_bits().to_le_bytes()).collect()
    }

    fn encode_control(&self, u: &Vec<f64>) -> Vec<u8> {
        u.iter().flat_map(|v| v.to_bits().to_le_bytes()).collect()
    }
}

fn multiagent_complexity() -> Outcome {
    let z: Vec<i32> = (-3..=3).collect();
    let rho = 0.25;
    let toy = PlaneToy {
        bounds: ControlBounds::uniform(2, -1.0, 1.0),
        target: [1.7, -0.4],
    };
    let base_u = vec![0.9, -0.3];
    let u0 = base_u.clone();
    let base = FnPolicy::new(move |_k, _x: &Vec<f64>| Some(u0.clone()));
    let cfg = MultiagentConfig::uniform(2, rho, z.clone(), CoordinateOrder::Ascending);
    let mut r = rng::stream(0, "acceptance-toy", 0);
    let imp = improve_trajectory(
        &toy,
        &base,
        &vec![0.0, 0.0],
        &MultiagentControlSet::new(cfg.clone()).unwrap(),
        0.0,
        &mut r,
    )
    .unwrap();
    // box membership is separable, so each coordinate's count is fixed
    let expected: usize = (0..2)
        .map(|i| z.iter().filter(|&&m| (base_u[i] + f64::from(m) * rho).abs() <= 1.0).count())
        .sum();
    ensure(imp.candidates.iter().all(|&c| c == expected), || {
        format!("toy counts {:?}, expected {expected}", imp.candidates)
    })?;

    for (name, _) in BUNDLED.iter().filter(|(n, _)| n.starts_with("multi")) {
        let p = DroneProblem::new(bundled_scenario(name).unwrap()).unwrap();
        let bound = p.scenario().multiagent.offsets.len() * 3 * p.scenario().num_drones();
        let h = run_drone(&p, CoordinateOrder::Ascending, 1, 0).unwrap();
        let c = &h.entries[1].candidates;
        ensure(c.iter().all(|&v| v <= bound), || format!("{name}: {c:?} above {bound}"))?;
    }

    for seed in 0..50u64 {
        let mut r = rng::stream(seed, "acceptance-separable", 0);
        let w: [f64; 2] = [r.random_range(0.1..3.0), r.random_range(0.1..3.0)];
        let t: [f64; 2] = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let inc = [r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)];
        let f = |u: &[f64]| w[0] * (u[0] - t[0]).powi(2) + w[1] * (u[1] - t[1]).abs();
        let admit = |u: &Vec<f64>| u.iter().all(|v| v.abs() <= 1.0);
        let out = multiagent_minimize(admit, &inc, &cfg, &[0, 1], 0.0, 0, |c| {
            Ok(c.iter().map(|u| f(u)).collect())
        })
        .unwrap();
        let mut best = f64::INFINITY;
        for &a in &z {
            for &b in &z {
                let u = vec![inc[0] + f64::from(a) * rho, inc[1] + f64::from(b) * rho];
                if admit(&u) {
                    best = best.min(f(&u));
                }
            }
        }
        ensure((out.value - best).abs() <= ASSIGN_TOL, || {
            format!("seed {seed}: coordinate descent {} vs grid {best}", out.value)
        })?;
        ensure(out.evaluated <= z.len() * 2, || format!("seed {seed}: {} evaluated", out.evaluated))?;
    }
    Ok(format!("toy stages evaluate {expected} <= {} candidates; 50 separable cases match the grid", z.len() * 2))
}

fn consistency_by_construction() -> Outcome {
    let mut tabular = 0;
    for seed in 0..100u64 {
        let n = 1 + (seed as usize % 6);
        let m = 2 + (seed as usize % 5);
        let p = MdaProblem::new(random_instance(n, m, seed).unwrap());
        let t = p.random_trajectory(seed);
        let report = check_consistency(&p, &TabularGenerator, &t, seed).unwrap();
        ensure(report.passed() && report.stages_checked == n, || format!("tabular seed {seed}"))?;
        tabular += 1;
    }
    let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
    let mut residual = 0;
    for i in 0..10u64 {
        let name = names[i as usize % names.len()];
        let p = DroneProblem::new(bundled_scenario(name).unwrap()).unwrap();
        let s = p.scenario();
        let t = rollout_policy(&p, &heuristic_base_policy(s), &p.initial_state()).unwrap();
        let generator = ResidualGenerator {
            sampling: s.sampling.clone(),
            training: s.training.clone(),
        };
        let mut r = rng::stream(i, "acceptance-residual", 0);
        let policy = generator.generate(&p, &t, &mut r).unwrap();
        for k in 0..t.horizon() {
            let u = policy.act(k, &t.states[k]).ok_or_else(|| format!("{name}: undefined at {k}"))?;
            let same = u.len() == t.controls[k].len()
                && u.iter().zip(&t.controls[k]).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || format!("{name} instance {i}: stage {k} {u:?} vs {:?}", t.controls[k]))?;
        }
        residual += 1;
    }
    Ok(format!("{tabular} tabular trajectories and {residual} trained residual policies bit-exact"))
}

fn hungarian() -> Outcome {
    let start = Instant::now();
    for seed in 0..200u64 {
        let m = 1 + (seed as usize % 7);
        let mut r = rng::stream(seed, "acceptance-hungarian", 0);
        let c: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..m).map(|_| r.random_range(-10.0..10.0)).collect())
            .collect();
        let (assign, total) = hungarian_2d_assignment(&c).unwrap();
        let best = heap_permutations(m)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| c[i][j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        ensure((total - best).abs() <= ASSIGN_TOL * best.abs().max(1.0), || {
            format!("seed {seed} m={m}: {total} vs {best}")
        })?;
        let mut seen = vec![false; m];
        for &j in &assign {
            ensure(!std::mem::replace(&mut seen[j], true), || format!("seed {seed}: not a permutation"))?;
        }
    }
    within(30, start)?;
    Ok("200 matrices match permutation search".into())
}

fn collect_csvs(dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_csvs(&p, out);
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
        }
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = 0;
    for (name, _) in BUNDLED_CONFIGS {
        let loaded = bundled_config(name).unwrap();
        let inconsistent = matches!(&loaded.params, DomainParams::Graph(p, _) if !p.overrides.is_empty());
        let mut runs = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("{name}-{rep}"));
            run_experiment(
                &loaded,
                &RunOptions {
                    allow_inconsistent: inconsistent,
                    output_dir: Some(dir.clone()),
                },
            )
            .map_err(|e| format!("{name}: {e}"))?;
            let mut csvs = Vec::new();
            collect_csvs(&dir, &mut csvs);
            runs.push(csvs);
        }
        ensure(!runs[0].is_empty() && runs[0] == runs[1], || format!("{name}: CSV outputs differ"))?;
        files += runs[0].len();
    }
    Ok(format!("{} bundled configs, {files} CSV files byte-identical", BUNDLED_CONFIGS.len()))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("monotone improvement", monotone_improvement),
        ("fixed point", fixed_point),
        ("oracle optimality", oracle_optimality),
        ("two-stage counterexample", counterexample),
        ("small MDA convergence and gap", mda_gap_behavior),
        ("large MDA cost reduction", large_mda),
        ("multiagent complexity", multiagent_complexity),
        ("consistency by construction", consistency_by_construction),
        ("Hungarian correctness", hungarian),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        // written past the test harness capture so the lines always show
        let _ = writeln!(
            std::io::stdout().lock(),
            "criterion {:>2} {status} [{name}] ({:.1}s) {detail}",
            i + 1,
            t.elapsed().as_secs_f64()
        );
        if outcome.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
