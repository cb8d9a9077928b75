//! Seeded oracle and invariant checks behind `olpi verify`.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use olpi_core::drone::{bundled_scenario, heuristic_base_policy, DroneProblem};
use olpi_core::exact::{
    brute_force_optimal, exact_policy_iteration, solve_dp, EnumerableProblem,
    DEFAULT_BRUTE_FORCE_CAP,
};
use olpi_core::generators::{
    check_consistency, Generator, OverlayGenerator, OverrideGenerator, ResidualGenerator,
    TabularGenerator,
};
use olpi_core::graph::{GraphProblem, RandomGraphParams};
use olpi_core::mda::{brute_force_mda, hungarian_2d_assignment, permutations, random_instance, run_mda, MdaProblem};
use olpi_core::model::{
    policy_cost_to_go, rollout_policy, ControlProblem, FnPolicy, SharedPolicy, Trajectory,
};
use olpi_core::online::{
    multiagent_minimize, product_grid, run_online_pi, CoordinateOrder, FullControlSet,
    MultiagentConfig, OnlineOptions,
};
use olpi_core::rng;

use crate::run::{run_experiment, RunOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Oracle,
    Invariants,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub budget: Option<Duration>,
    /// Swap a deliberately inconsistent generator into the consistency check.
    pub inject_inconsistent: bool,
}

type Check = fn(&VerifyOptions) -> Result<String, String>;

const ORACLE_CHECKS: &[(&str, Check)] = &[
    ("mda-dp-vs-brute-force", mda_oracles),
    ("exact-pi-vs-dp", exact_pi_vs_dp),
    ("graph-brute-force-vs-dp", graph_brute_force),
    ("hungarian-vs-permutations", hungarian),
    ("two-stage-counterexample", counterexample),
];

const INVARIANT_CHECKS: &[(&str, Check)] = &[
    ("monotone-mda", monotone_mda),
    ("monotone-graphs", monotone_graphs),
    ("generator-consistency", generator_consistency),
    ("tabular-consistency", tabular_consistency),
    ("residual-consistency", residual_consistency),
    ("multiagent-counts", multiagent_counts),
    ("deterministic-outputs", deterministic_outputs),
];

pub fn run_checks(suite: Suite, opts: &VerifyOptions) -> Vec<CheckResult> {
    let mut plan: Vec<(&'static str, &'static str, Check)> = Vec::new();
    if suite != Suite::Invariants {
        plan.extend(ORACLE_CHECKS.iter().map(|(n, c)| ("oracle", *n, *c)));
    }
    if suite != Suite::Oracle {
        plan.extend(INVARIANT_CHECKS.iter().map(|(n, c)| ("invariants", *n, *c)));
    }
    let start = Instant::now();
    plan.into_iter()
        .map(|(suite, name, check)| {
            if opts.budget.is_some_and(|b| start.elapsed() > b) {
                return CheckResult {
                    suite,
                    name,
                    status: Status::Skip,
                    detail: "time budget exhausted".into(),
                    seconds: 0.0,
                };
            }
            let t = Instant::now();
            let (status, detail) = match check(opts) {
                Ok(d) => (Status::Pass, d),
                Err(d) => (Status::Fail, d),
            };
            CheckResult {
                suite,
                name,
                status,
                detail,
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

pub fn render_table(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        let status = match r.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        out.push_str(&format!(
            "{status}  {:<10} {:<28} {:>7.2}s  {}\n",
            r.suite, r.name, r.seconds, r.detail
        ));
    }
    out
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn core<T>(r: olpi_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn first_control(g: &GraphProblem) -> SharedPolicy<GraphProblem> {
    let g = g.clone();
    Arc::new(FnPolicy::new(move |k, x: &String| {
        g.controls(k, x).and_then(|c| c.into_iter().next())
    }))
}

fn random_graph(seed: u64) -> (GraphProblem, usize) {
    let horizon = 1 + (seed as usize % 5);
    let g = GraphProblem::random(
        &RandomGraphParams {
            horizon,
            max_states: 6,
            max_controls: 4,
            integer_costs: seed % 2 == 0,
        },
        seed,
    );
    (g, horizon)
}

fn mda_oracles(_: &VerifyOptions) -> Result<String, String> {
    for seed in 0..10 {
        let p = MdaProblem::new(core(core(random_instance(3, 3, seed))?.materialize())?);
        let (bf, _) = core(brute_force_mda(p.instance(), DEFAULT_BRUTE_FORCE_CAP))?;
        let ep = core(EnumerableProblem::reachable(&p, p.initial_state()))?;
        let (table, _) = core(solve_dp(&ep))?;
        let dp = table.value(&p, 0, &p.initial_state()).ok_or("missing x0")?;
        ensure(dp == bf, || format!("seed {seed}: dp {dp} != brute force {bf}"))?;
        let h = core(run_mda(&p, &p.random_trajectory(seed), 10, seed))?;
        ensure(h.final_cost() >= bf, || {
            format!("seed {seed}: on-line cost {} below optimum {bf}", h.final_cost())
        })?;
    }
    Ok("10/10 instances agree".into())
}

fn exact_pi_vs_dp(_: &VerifyOptions) -> Result<String, String> {
    for seed in 0..20 {
        let (g, n) = random_graph(seed);
        let ep = core(EnumerableProblem::reachable(&g, g.initial_state()))?;
        let (opt, _) = core(solve_dp(&ep))?;
        let records = core(exact_policy_iteration(&ep, &first_control(&g), n))?;
        let diff = records
            .last()
            .and_then(|r| r.table.max_abs_diff(&opt))
            .ok_or("tables differ in shape")?;
        ensure(diff <= 1e-9, || format!("seed {seed}: max difference {diff}"))?;
    }
    Ok("20/20 reach the DP table within N iterations".into())
}

fn graph_brute_force(_: &VerifyOptions) -> Result<String, String> {
    for seed in 100..120 {
        let (g, _) = random_graph(seed);
        let x0 = g.initial_state();
        let ep = core(EnumerableProblem::reachable(&g, x0.clone()))?;
        let dp = core(solve_dp(&ep))?.0.value(&g, 0, &x0).ok_or("missing x0")?;
        let (bf, _) = core(brute_force_optimal(&g, &x0, DEFAULT_BRUTE_FORCE_CAP))?;
        ensure((dp - bf).abs() <= 1e-9, || format!("seed {seed}: dp {dp} vs {bf}"))?;
    }
    Ok("20/20 agree".into())
}

fn hungarian(_: &VerifyOptions) -> Result<String, String> {
    for seed in 0..200u64 {
        let m = 1 + (seed as usize % 7);
        let mut r = rng::stream(seed, "verify-hungarian", 0);
        let c: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..m).map(|_| r.random_range(0.0..10.0)).collect())
            .collect();
        let (_, total) = core(hungarian_2d_assignment(&c))?;
        let best = permutations(m)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| c[i][j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        ensure((total - best).abs() <= 1e-12 * best.max(1.0), || {
            format!("seed {seed}: {total} vs {best}")
        })?;
    }
    Ok("200/200 matrices optimal".into())
}

fn counterexample_base() -> SharedPolicy<GraphProblem> {
    Arc::new(FnPolicy::new(|_k, x: &String| {
        Some(if x == "x0" { "u0" } else if x == "x1" { "u1" } else { "u1'" }.to_string())
    }))
}

fn counterexample(_: &VerifyOptions) -> Result<String, String> {
    let g = GraphProblem::two_stage_counterexample();
    let x0 = g.initial_state();
    let ep = core(EnumerableProblem::reachable(&g, x0.clone()))?;
    let dp = core(solve_dp(&ep))?.0.value(&g, 0, &x0);
    let base = counterexample_base();
    let j0 = core(policy_cost_to_go(&g, &base, &x0, 0))?;
    let h = core(run_online_pi(
        &g,
        &x0,
        base.clone(),
        &OverlayGenerator::new(base),
        &FullControlSet,
        &OnlineOptions::default(),
    ))?;
    ensure(dp == Some(15.0) && j0 == 20.0 && h.costs()[..2] == [20.0, 15.0], || {
        format!("optimum {dp:?}, base {j0}, costs {:?}", h.costs())
    })?;
    Ok("optimum 15, base 20, one iteration reaches 15".into())
}

fn monotone_mda(_: &VerifyOptions) -> Result<String, String> {
    for seed in 0..20 {
        let n = 3 + (seed as usize % 3);
        let m = 3 + (seed as usize % 2);
        let p = MdaProblem::new(core(core(random_instance(n, m, seed))?.materialize())?);
        let h = core(run_mda(&p, &p.random_trajectory(seed), 10, seed))?;
        let c = h.costs();
        ensure(c.windows(2).all(|w| w[1] <= w[0]), || format!("seed {seed}: {c:?}"))?;
    }
    Ok("20/20 nonincreasing".into())
}

fn monotone_graphs(_: &VerifyOptions) -> Result<String, String> {
    for seed in 200..250 {
        let (g, _) = random_graph(seed);
        let base = first_control(&g);
        let h = core(run_online_pi(
            &g,
            &g.initial_state(),
            base.clone(),
            &OverlayGenerator::new(base),
            &FullControlSet,
            &OnlineOptions::default(),
        ))?;
        ensure(!h.has_improvement_violation(), || format!("seed {seed}: {:?}", h.costs()))?;
    }
    Ok("50/50 nonincreasing".into())
}

fn generator_consistency(opts: &VerifyOptions) -> Result<String, String> {
    let g = GraphProblem::two_stage_counterexample();
    let improved = Trajectory::new(
        vec!["x0".into(), "x1'".into(), "x2'".into()],
        vec!["u0'".into(), "u1'".into()],
    );
    let overlay = OverlayGenerator::new(counterexample_base());
    let generator: Box<dyn Generator<GraphProblem>> = if opts.inject_inconsistent {
        Box::new(OverrideGenerator::new(
            overlay,
            vec![(1, "x1'".to_string(), "u1''".to_string())],
        ))
    } else {
        Box::new(overlay)
    };
    let report = core(check_consistency(&g, generator.as_ref(), &improved, 0))?;
    match report.first_failure() {
        None => Ok(format!("{} stages reproduced", report.stages_checked)),
        Some(f) => Err(format!(
            "stage {}: expected {:?}, generated {:?}",
            f.stage, f.expected, f.actual
        )),
    }
}

fn tabular_consistency(_: &VerifyOptions) -> Result<String, String> {
    for seed in 0..100 {
        let n = 1 + (seed as usize % 6);
        let m = 1 + (seed as usize % 5);
        let p = MdaProblem::new(core(random_instance(n, m, seed))?);
        let t = p.random_trajectory(seed);
        let report = core(check_consistency(&p, &TabularGenerator, &t, seed))?;
        ensure(report.passed(), || format!("seed {seed}: stage {:?}", report.first_failure().map(|f| f.stage)))?;
    }
    Ok("100/100 trajectories reproduced".into())
}

fn residual_consistency(_: &VerifyOptions) -> Result<String, String> {
    let names = ["single-1", "single-2", "multi-1"];
    for (i, name) in names.iter().enumerate() {
        let p = core(DroneProblem::new(core(bundled_scenario(name))?))?;
        let s = p.scenario();
        let t = core(rollout_policy(&p, &heuristic_base_policy(s), &p.initial_state()))?;
        let generator = ResidualGenerator {
            sampling: s.sampling.clone(),
            training: s.training.clone(),
        };
        let report = core(check_consistency(&p, &generator, &t, i as u64))?;
        ensure(report.passed(), || format!("{name}: stage {:?}", report.first_failure().map(|f| f.stage)))?;
    }
    Ok(format!("{}/{} trained generators bit-exact", names.len(), names.len()))
}

fn multiagent_counts(_: &VerifyOptions) -> Result<String, String> {
    let offsets: Vec<i32> = (-2..=2).collect();
    for seed in 0..20u64 {
        let dim = 1 + (seed as usize % 6);
        let cfg = MultiagentConfig::uniform(dim, 0.3, offsets.clone(), CoordinateOrder::Ascending);
        let mut r = rng::stream(seed, "verify-multiagent", 0);
        let target: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let f = |u: &Vec<f64>| u.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let inc = vec![0.0; dim];
        let order: Vec<usize> = (0..dim).collect();
        let out = core(multiagent_minimize(|u| u.iter().all(|v| v.abs() <= 1.0), &inc, &cfg, &order, 0.0, 0, |c| {
            Ok(c.iter().map(f).collect())
        }))?;
        ensure(out.evaluated <= offsets.len() * dim, || {
            format!("seed {seed}: {} candidates", out.evaluated)
        })?;
        if dim <= 2 {
            let best = product_grid(&inc, &cfg)
                .iter()
                .filter(|u| u.iter().all(|v| v.abs() <= 1.0))
                .map(f)
                .fold(f64::INFINITY, f64::min);
            ensure((out.value - best).abs() <= 1e-12, || {
                format!("seed {seed}: {} vs grid {best}", out.value)
            })?;
        }
    }
    Ok("counts within |Z|*n; separable costs match the grid".into())
}

fn deterministic_outputs(_: &VerifyOptions) -> Result<String, String> {
    let loaded = crate::config::bundled_config("mda_small").map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        run_experiment(
            &loaded,
            &RunOptions {
                allow_inconsistent: false,
                output_dir: Some(out.clone()),
            },
        )
        .map_err(|e| e.to_string())?;
        let read = |f: &str| std::fs::read(out.join(f)).map_err(|e| e.to_string());
        outputs.push((read("history.csv")?, read("results.csv")?));
    }
    ensure(outputs[0] == outputs[1], || "CSV outputs differ between runs".into())?;
    Ok("history.csv and results.csv byte-identical".into())
}
