//! Seeded end-to-end experiment runs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Map, Value};

use olpi_core::drone::{
    heuristic_base_policy, multiagent_config, sequential_agent_schedule, DroneProblem,
    ScheduleOrder,
};
use olpi_core::exact::{solve_dp, EnumerableProblem};
use olpi_core::generators::{
    check_consistency, ConsistencyReport, Generator, OverlayGenerator, OverrideGenerator,
    ResidualGenerator, TabularGenerator,
};
use olpi_core::graph::GraphProblem;
use olpi_core::mda::{brute_force_mda, results_csv, MdaInstance, MdaProblem};
use olpi_core::model::{rollout_policy, ControlProblem, FnPolicy, SharedPolicy};
use olpi_core::online::{
    run_online_pi, ControlSetBuilder, CoordinateOrder, FullControlSet, IterationHistory,
    MultiagentControlSet, OnlineOptions, ProductGridControlSet, RandomSubset, SampledControlSet,
};
use olpi_core::generators::ReplayPolicy;
use olpi_core::mda::MAX_TABLE_ENTRIES;

use crate::config::{
    DomainParams, DroneParams, GraphParams, LoadedConfig, MdaParams, StageAssignment, Variant,
};
use crate::output::{mean_std, resolve_output_dir, sha256_hex, write_atomic, write_json};
use crate::{CliError, Result};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Record generator inconsistencies instead of aborting.
    pub allow_inconsistent: bool,
    /// Replaces the config's `output_dir`.
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub costs: Vec<f64>,
    pub monotone: bool,
    pub converged_at: Option<usize>,
    /// Oracle optimum when one was computed.
    pub optimum: Option<f64>,
}

struct Recorder {
    dir: PathBuf,
    meta: Map<String, Value>,
}

impl Recorder {
    fn set(&mut self, key: &str, value: impl Serialize) {
        self.meta
            .insert(key.into(), serde_json::to_value(value).expect("metadata serializes"));
    }

    fn note(&mut self, text: &str) {
        if let Some(Value::Array(a)) = self.meta.get_mut("notes") {
            a.push(text.into());
        }
    }

    fn flush(&self) -> Result<()> {
        write_json(&self.dir.join("metadata.json"), &Value::Object(self.meta.clone()))
    }
}

fn consistency_json<U>(r: &ConsistencyReport<U>) -> Value {
    json!({
        "passed": r.passed(),
        "stages_checked": r.stages_checked,
        "first_failure_stage": r.first_failure().map(|f| f.stage),
    })
}

/// Records the initial consistency check, runs the engine, and records the
/// outcome. Metadata is on disk before the first iteration starts.
fn drive<P, G, B>(
    rec: &mut Recorder,
    problem: &P,
    x0: &P::State,
    pi0: SharedPolicy<P>,
    generator: &G,
    builder: &B,
    options: &OnlineOptions,
) -> Result<IterationHistory<P::State, P::Control>>
where
    P: ControlProblem,
    G: Generator<P> + ?Sized,
    B: ControlSetBuilder<P> + ?Sized,
{
    let traj0 = rollout_policy(problem, &pi0, x0)?;
    let report = check_consistency(problem, generator, &traj0, options.seed)?;
    rec.set("initial_consistency", consistency_json(&report));
    rec.set("status", "running");
    rec.flush()?;

    let history = match run_online_pi(problem, x0, pi0, generator, builder, options) {
        Ok(h) => h,
        Err(e) => {
            rec.set("status", "failed");
            rec.set("error", e.to_string());
            rec.flush()?;
            return Err(e.into());
        }
    };

    let all_times: Vec<f64> = history
        .entries
        .iter()
        .flat_map(|e| e.stage_times_ms.iter().copied())
        .collect();
    let per_iteration: Vec<Value> = history
        .entries
        .iter()
        .filter_map(|e| {
            mean_std(&e.stage_times_ms).map(|(m, s)| json!({"iteration": e.iteration, "mean": m, "std": s}))
        })
        .collect();
    let stage_stats = mean_std(&all_times);
    rec.set("status", "completed");
    rec.set("iterations_run", history.entries.len() - 1);
    rec.set("converged_at", history.converged_at);
    rec.set("costs", history.costs());
    rec.set(
        "monotonicity",
        if history.has_improvement_violation() {
            "violated"
        } else {
            "monotone"
        },
    );
    rec.set(
        "iteration_consistency",
        history
            .entries
            .iter()
            .filter_map(|e| e.consistency.as_ref().map(|c| c.passed()))
            .collect::<Vec<_>>(),
    );
    rec.set(
        "candidates_per_iteration",
        history
            .entries
            .iter()
            .skip(1)
            .map(|e| e.candidates.iter().sum::<usize>())
            .collect::<Vec<_>>(),
    );
    rec.set(
        "stage_time_ms",
        json!({
            "mean": stage_stats.map(|s| s.0),
            "std": stage_stats.map(|s| s.1),
            "per_iteration": per_iteration,
        }),
    );
    rec.set("warnings", &history.warnings);
    write_atomic(&rec.dir.join("history.csv"), history.to_csv().as_bytes())?;
    Ok(history)
}

fn write_json_trajectories<S: Serialize + Clone, U: Serialize + Clone>(
    dir: &Path,
    history: &IterationHistory<S, U>,
) -> Result<()> {
    for e in &history.entries {
        let text = e.trajectory.to_json()?;
        write_atomic(
            &dir.join("trajectories").join(format!("iter_{:03}.json", e.iteration)),
            text.as_bytes(),
        )?;
    }
    Ok(())
}

/// Runs one experiment and writes its artifacts.
pub fn run_experiment(loaded: &LoadedConfig, opts: &RunOptions) -> Result<RunSummary> {
    let cfg = &loaded.config;
    let dir = resolve_output_dir(opts.output_dir.as_deref().unwrap_or(&cfg.output_dir));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut rec = Recorder {
        dir: dir.clone(),
        meta: Map::new(),
    };
    rec.set("tool_version", env!("CARGO_PKG_VERSION"));
    rec.set("domain", cfg.domain);
    rec.set("variant", cfg.variant);
    rec.set("generator", cfg.generator);
    rec.set("seed", cfg.seed);
    rec.set("config_sha256", sha256_hex(&loaded.raw));
    rec.set("iterations_requested", cfg.iterations);
    rec.set("tie_tol", cfg.tie_tol());
    rec.set("allow_inconsistent", opts.allow_inconsistent);
    rec.set("notes", Vec::<String>::new());

    let options = OnlineOptions {
        max_iters: cfg.iterations,
        tie_tol: cfg.tie_tol(),
        slack: cfg.tie_tol(),
        seed: cfg.seed,
        allow_inconsistent: opts.allow_inconsistent,
        memoize: true,
    };
    let (history_costs, monotone, converged_at, optimum) = match &loaded.params {
        DomainParams::Mda(p) => run_mda_domain(&mut rec, cfg.variant, cfg.seed, p, &options)?,
        DomainParams::Drone(p, s) => {
            run_drone_domain(&mut rec, cfg.variant, cfg.seed, p, s.clone(), &options)?
        }
        DomainParams::Graph(p, spec) => {
            run_graph_domain(&mut rec, cfg.variant, p, spec.clone(), &options)?
        }
    };
    rec.set("optimum", optimum);
    rec.flush()?;
    Ok(RunSummary {
        dir,
        costs: history_costs,
        monotone,
        converged_at,
        optimum,
    })
}

type Outcome = (Vec<f64>, bool, Option<usize>, Option<f64>);

fn outcome<S, U>(h: &IterationHistory<S, U>, optimum: Option<f64>) -> Outcome {
    (h.costs(), !h.has_improvement_violation(), h.converged_at, optimum)
}

fn run_mda_domain(
    rec: &mut Recorder,
    variant: Variant,
    seed: u64,
    p: &MdaParams,
    options: &OnlineOptions,
) -> Result<Outcome> {
    let instance = match &p.cost_table {
        Some(t) => MdaInstance::table(p.n, p.m, t.clone())?,
        None => MdaInstance::prf(p.n, p.m, p.instance_seed.unwrap_or(seed))?,
    };
    if p.cost_table.is_none() {
        rec.note("grouping costs are uniform on [0, 1), drawn by a seeded hash of the node tuple");
    }
    let small = (p.m as f64).powi(p.n as i32 + 1) <= MAX_TABLE_ENTRIES as f64;
    let problem = MdaProblem::new(if small { instance.materialize()? } else { instance });
    let initial = problem.random_trajectory(seed);
    let pi0: SharedPolicy<MdaProblem> = Arc::new(ReplayPolicy::new(initial.controls.clone()));
    let x0 = problem.initial_state();
    let history = match variant {
        Variant::Simplified => {
            if p.m > 8 {
                return Err(CliError::Config(
                    "variant: simplified MDA enumerates permutations and needs m <= 8".into(),
                ));
            }
            let b = RandomSubset { keep: p.keep };
            drive(rec, &problem, &x0, pi0, &TabularGenerator, &b, options)?
        }
        _ => drive(
            rec,
            &problem,
            &x0,
            pi0,
            &TabularGenerator,
            &olpi_core::mda::HungarianStage,
            options,
        )?,
    };
    let optimum = match brute_force_mda(problem.instance(), p.brute_force_cap) {
        Ok((c, _)) => Some(c),
        Err(olpi_core::Error::CapExceeded { estimate, .. }) => {
            rec.note(&format!(
                "brute-force oracle skipped: {estimate:e} assignments exceed the cap"
            ));
            None
        }
        Err(e) => return Err(e.into()),
    };
    write_atomic(&rec.dir.join("results.csv"), results_csv(&history, optimum).as_bytes())?;
    write_json_trajectories(&rec.dir, &history)?;
    Ok(outcome(&history, optimum))
}

fn run_drone_domain(
    rec: &mut Recorder,
    variant: Variant,
    seed: u64,
    p: &DroneParams,
    scenario: olpi_core::drone::DroneScenario,
    options: &OnlineOptions,
) -> Result<Outcome> {
    let drones = scenario.num_drones();
    rec.set("scenario", &scenario.name);
    if drones > 1 {
        rec.note("separation penalty uses the same barrier form as obstacle repulsion");
    }
    let problem = DroneProblem::new(scenario)?;
    let s = problem.scenario();
    let pi0: SharedPolicy<DroneProblem> = Arc::new(heuristic_base_policy(s));
    let generator = ResidualGenerator {
        sampling: s.sampling.clone(),
        training: s.training.clone(),
    };
    let x0 = problem.initial_state();
    let schedule = |order| CoordinateOrder::Explicit(sequential_agent_schedule(drones, order, seed));
    let builder: Box<dyn ControlSetBuilder<DroneProblem>> = match variant {
        Variant::Standard => Box::new(ProductGridControlSet::new(
            multiagent_config(s, CoordinateOrder::Ascending),
            p.grid_cap,
        )?),
        Variant::Simplified => Box::new(SampledControlSet {
            samples: p.samples,
            sigma_fraction: p.sigma_fraction,
        }),
        Variant::Multiagent => Box::new(MultiagentControlSet::new(multiagent_config(
            s,
            schedule(ScheduleOrder::Fixed),
        ))?),
        Variant::MultiagentPermuted => Box::new(MultiagentControlSet::new(multiagent_config(
            s,
            schedule(ScheduleOrder::Permuted),
        ))?),
    };
    if let Variant::Multiagent | Variant::MultiagentPermuted = variant {
        rec.set(
            "agent_schedule",
            sequential_agent_schedule(
                drones,
                if variant == Variant::Multiagent {
                    ScheduleOrder::Fixed
                } else {
                    ScheduleOrder::Permuted
                },
                seed,
            ),
        );
    }
    let history = drive(rec, &problem, &x0, pi0, &generator, builder.as_ref(), options)?;
    let mut goals = Vec::new();
    for e in &history.entries {
        for d in 0..drones {
            write_atomic(
                &rec.dir
                    .join("trajectories")
                    .join(format!("iter_{:03}_drone_{d}.csv", e.iteration)),
                problem.trajectory_csv(&e.trajectory, d).as_bytes(),
            )?;
        }
        goals.push(problem.goals_reached(e.trajectory.terminal_state()));
    }
    rec.set("goals_reached", goals);
    Ok(outcome(&history, None))
}

fn assignment_table(entries: &[StageAssignment]) -> HashMap<(usize, String), String> {
    entries
        .iter()
        .map(|a| ((a.stage, a.state.clone()), a.control.clone()))
        .collect()
}

fn run_graph_domain(
    rec: &mut Recorder,
    variant: Variant,
    p: &GraphParams,
    spec: olpi_core::graph::GraphSpec,
    options: &OnlineOptions,
) -> Result<Outcome> {
    let problem = GraphProblem::new(spec)?;
    let x0 = problem.initial_state();
    let table = assignment_table(&p.base_policy);
    let g = problem.clone();
    let pi0: SharedPolicy<GraphProblem> = Arc::new(FnPolicy::new(move |k, x: &String| {
        table
            .get(&(k, x.clone()))
            .cloned()
            .or_else(|| g.controls(k, x).and_then(|c| c.into_iter().next()))
    }));
    let ep = EnumerableProblem::reachable(&problem, x0.clone())?;
    let (dp, _) = solve_dp(&ep)?;
    let optimum = dp.value(&problem, 0, &x0);

    let overlay = OverlayGenerator::new(pi0.clone());
    let full = FullControlSet;
    let subset = RandomSubset { keep: p.keep };
    let builder: &dyn ControlSetBuilder<GraphProblem> = match variant {
        Variant::Simplified => &subset,
        _ => &full,
    };
    let history = if p.overrides.is_empty() {
        drive(rec, &problem, &x0, pi0, &overlay, builder, options)?
    } else {
        rec.note("generator overrides break consistency on purpose");
        let overrides = p
            .overrides
            .iter()
            .map(|a| (a.stage, a.state.clone(), a.control.clone()))
            .collect();
        let generator = OverrideGenerator::new(overlay, overrides);
        drive(rec, &problem, &x0, pi0, &generator, builder, options)?
    };
    write_json_trajectories(&rec.dir, &history)?;
    Ok(outcome(&history, optimum))
}

/// Runs the two-stage counterexample twice: with the consistent generator
/// into `<dir>/consistent`, then with the bundled overrides into
/// `<dir>/inconsistent`.
pub fn demo_fig1(opts: &RunOptions) -> Result<(RunSummary, Result<RunSummary>)> {
    let loaded = crate::config::bundled_config("fig1")?;
    let base = opts
        .output_dir
        .clone()
        .unwrap_or_else(|| loaded.config.output_dir.clone());

    let mut consistent = loaded.clone();
    if let DomainParams::Graph(p, _) = &mut consistent.params {
        p.overrides.clear();
    }
    let good = run_experiment(
        &consistent,
        &RunOptions {
            allow_inconsistent: false,
            output_dir: Some(base.join("consistent")),
        },
    )?;
    let bad = run_experiment(
        &loaded,
        &RunOptions {
            allow_inconsistent: opts.allow_inconsistent,
            output_dir: Some(base.join("inconsistent")),
        },
    );
    Ok((good, bad))
}
