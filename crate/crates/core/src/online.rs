//! The on-line policy iteration engine.
//!
//! Each iteration improves the current policy's trajectory stage by stage
//! (one-step lookahead against the current policy's cost-to-go), hands the
//! improved trajectory to a generator, and rolls out the generated policy.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{
    check_consistency, policy_consistency, ConsistencyReport, Generator, GeneratorKind,
};
use crate::model::{
    checked_action, close, policy_cost_to_go, rollout_policy, same_trajectory,
    trajectory_cost, ControlProblem, Policy, SharedPolicy, Trajectory,
};
use crate::par;
use crate::rng::{self, StreamRng};

/// Default tie tolerance for continuous-cost problems.
pub const CONTINUOUS_TIE_TOL: f64 = 1e-9;

/// Everything a control-set builder needs at one stage of an improvement
/// sweep.
pub struct StageContext<'a, P: ControlProblem> {
    pub problem: &'a P,
    pub policy: &'a (dyn Policy<P::State, P::Control> + 'a),
    pub stage: usize,
    pub state: &'a P::State,
    pub incumbent: &'a P::Control,
    pub tie_tol: f64,
    pub memoize: bool,
}

impl<P: ControlProblem> StageContext<'_, P> {
    /// g_k(x, u) + J_{k+1,π}(f_k(x, u)) for every candidate, evaluated in
    /// parallel. With memoization, successor states sharing an encoding are
    /// simulated once.
    pub fn q_values(&self, candidates: &[P::Control]) -> Result<Vec<f64>> {
        let (k, x) = (self.stage, self.state);
        let next: Vec<P::State> = candidates
            .iter()
            .map(|u| self.problem.step(k, x, u))
            .collect();
        let tails = if self.memoize {
            let mut slot = Vec::with_capacity(next.len());
            let mut unique: Vec<&P::State> = Vec::new();
            let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
            for y in &next {
                let key = self.problem.encode_state(y);
                let idx = *seen.entry(key).or_insert_with(|| {
                    unique.push(y);
                    unique.len() - 1
                });
                slot.push(idx);
            }
            let values = par::try_map(&unique, |y| {
                policy_cost_to_go(self.problem, self.policy, y, k + 1)
            })?;
            slot.into_iter().map(|i| values[i]).collect()
        } else {
            par::try_map(&next, |y| policy_cost_to_go(self.problem, self.policy, y, k + 1))?
        };
        Ok(candidates
            .iter()
            .zip(tails)
            .map(|(u, tail)| self.problem.stage_cost(k, x, u) + tail)
            .collect())
    }

    pub fn q_value(&self, u: &P::Control) -> Result<f64> {
        let next = self.problem.step(self.stage, self.state, u);
        Ok(self.problem.stage_cost(self.stage, self.state, u)
            + policy_cost_to_go(self.problem, self.policy, &next, self.stage + 1)?)
    }

    fn check_candidates(&self, candidates: &[P::Control]) -> Result<usize> {
        for u in candidates {
            if !self.problem.admits(self.stage, self.state, u) {
                return Err(Error::InfeasibleCandidate {
                    stage: self.stage,
                    candidate: format!("{u:?}"),
                });
            }
        }
        candidates
            .iter()
            .position(|u| self.problem.same_control(u, self.incumbent))
            .ok_or_else(|| Error::IncumbentExcluded {
                stage: self.stage,
                incumbent: format!("{:?}", self.incumbent),
            })
    }

    /// Evaluates a finite candidate set containing the incumbent and applies
    /// the tie rule.
    pub fn minimize(&self, candidates: Vec<P::Control>) -> Result<Selection<P::Control>> {
        let inc = self.check_candidates(&candidates)?;
        let values = self.q_values(&candidates)?;
        let i = pick(&values, inc, self.tie_tol);
        Ok(Selection {
            value: values[i],
            candidates_evaluated: candidates.len(),
            control: candidates.into_iter().nth(i).expect("index in range"),
        })
    }
}

/// Index of the minimizer: the incumbent if it is within `tie_tol` of the
/// best value, otherwise the first best in order. NaN never wins.
pub fn pick(values: &[f64], incumbent: usize, tie_tol: f64) -> usize {
    let mut first: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_nan() && first.is_none_or(|f| v < values[f]) {
            first = Some(i);
        }
    }
    let Some(first) = first else {
        return incumbent;
    };
    let (vb, vi) = (values[first], values[incumbent]);
    if vi == vb || vi <= vb + tie_tol * vb.abs().max(1.0) {
        incumbent
    } else {
        first
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection<U> {
    pub control: U,
    pub value: f64,
    pub candidates_evaluated: usize,
}

/// Builds and minimizes over the candidate control set at one stage.
pub trait ControlSetBuilder<P: ControlProblem>: Sync {
    /// Whether selection consumes randomness.
    fn is_stochastic(&self) -> bool {
        false
    }

    fn select(&self, ctx: &StageContext<'_, P>, rng: &mut StreamRng) -> Result<Selection<P::Control>>;
}

/// Minimizes over the full enumerable control set.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullControlSet;

impl<P: ControlProblem> ControlSetBuilder<P> for FullControlSet {
    fn select(&self, ctx: &StageContext<'_, P>, _rng: &mut StreamRng) -> Result<Selection<P::Control>> {
        let all = ctx
            .problem
            .controls(ctx.stage, ctx.state)
            .ok_or(Error::NotEnumerable { stage: ctx.stage })?;
        ctx.minimize(all)
    }
}

type Restrict<S, U> = dyn Fn(usize, &S, &U, &mut StreamRng) -> Vec<U> + Send + Sync;

/// Minimizes over a caller-supplied subset, which must contain the
/// incumbent and pass the membership test.
pub struct RestrictedControlSet<S, U> {
    build: Box<Restrict<S, U>>,
    stochastic: bool,
}

impl<S, U> RestrictedControlSet<S, U> {
    pub fn new<F>(build: F) -> Self
    where
        F: Fn(usize, &S, &U, &mut StreamRng) -> Vec<U> + Send + Sync + 'static,
    {
        RestrictedControlSet {
            build: Box::new(build),
            stochastic: false,
        }
    }

    pub fn stochastic<F>(build: F) -> Self
    where
        F: Fn(usize, &S, &U, &mut StreamRng) -> Vec<U> + Send + Sync + 'static,
    {
        RestrictedControlSet {
            build: Box::new(build),
            stochastic: true,
        }
    }
}

impl<P: ControlProblem> ControlSetBuilder<P> for RestrictedControlSet<P::State, P::Control> {
    fn is_stochastic(&self) -> bool {
        self.stochastic
    }

    fn select(&self, ctx: &StageContext<'_, P>, rng: &mut StreamRng) -> Result<Selection<P::Control>> {
        let set = (self.build)(ctx.stage, ctx.state, ctx.incumbent, rng);
        ctx.minimize(set)
    }
}

/// Random subset of an enumerable control set: the incumbent plus each
/// other control independently with probability `keep`.
#[derive(Clone, Copy, Debug)]
pub struct RandomSubset {
    pub keep: f64,
}

impl<P: ControlProblem> ControlSetBuilder<P> for RandomSubset {
    fn is_stochastic(&self) -> bool {
        true
    }

    fn select(&self, ctx: &StageContext<'_, P>, rng: &mut StreamRng) -> Result<Selection<P::Control>> {
        let all = ctx
            .problem
            .controls(ctx.stage, ctx.state)
            .ok_or(Error::NotEnumerable { stage: ctx.stage })?;
        let keep = self.keep.clamp(0.0, 1.0);
        let set = all
            .into_iter()
            .filter(|u| ctx.problem.same_control(u, ctx.incumbent) || rng.random_bool(keep))
            .collect();
        ctx.minimize(set)
    }
}

/// The incumbent plus `samples` Gaussian perturbations of it, each
/// coordinate scaled by `sigma_fraction` of the box half-width and clamped
/// into the box.
#[derive(Clone, Copy, Debug)]
pub struct SampledControlSet {
    pub samples: usize,
    pub sigma_fraction: f64,
}

impl<P> ControlSetBuilder<P> for SampledControlSet
where
    P: ControlProblem<Control = Vec<f64>>,
{
    fn is_stochastic(&self) -> bool {
        true
    }

    fn select(&self, ctx: &StageContext<'_, P>, rng: &mut StreamRng) -> Result<Selection<Vec<f64>>> {
        let bounds = ctx
            .problem
            .control_bounds(ctx.stage, ctx.state)
            .ok_or(Error::NoControlBounds { stage: ctx.stage })?;
        let mut set = vec![ctx.incumbent.clone()];
        for _ in 0..self.samples {
            let mut u: Vec<f64> = ctx
                .incumbent
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    c + self.sigma_fraction * bounds.half_width(i) * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            bounds.saturate(&mut u);
            if ctx.problem.admits(ctx.stage, ctx.state, &u) {
                set.push(u);
            }
        }
        ctx.minimize(set)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateOrder {
    Ascending,
    /// A fresh uniform permutation at every stage.
    Permuted,
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiagentConfig {
    /// ρ_i, one per control coordinate.
    pub resolutions: Vec<f64>,
    /// Z; must contain 0.
    pub offsets: Vec<i32>,
    pub order: CoordinateOrder,
}

impl MultiagentConfig {
    pub fn uniform(dim: usize, rho: f64, offsets: Vec<i32>, order: CoordinateOrder) -> Self {
        MultiagentConfig {
            resolutions: vec![rho; dim],
            offsets,
            order,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.offsets.contains(&0) {
            return Err(Error::schema("offsets", "must contain 0"));
        }
        if let Some(i) = self.resolutions.iter().position(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::schema(format!("resolutions[{i}]"), "must be positive"));
        }
        if let CoordinateOrder::Explicit(order) = &self.order {
            let mut seen = vec![false; self.resolutions.len()];
            for &i in order {
                if i >= seen.len() || seen[i] {
                    return Err(Error::schema("order", "must be a permutation of the coordinates"));
                }
                seen[i] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::schema("order", "must be a permutation of the coordinates"));
            }
        }
        Ok(())
    }

    fn stage_order(&self, rng: &mut StreamRng) -> Vec<usize> {
        let n = self.resolutions.len();
        match &self.order {
            CoordinateOrder::Ascending => (0..n).collect(),
            CoordinateOrder::Permuted => permuted_coordinate_order(n, rng),
            CoordinateOrder::Explicit(v) => v.clone(),
        }
    }
}

/// Uniform random permutation of `0..n` (Fisher–Yates).
pub fn permuted_coordinate_order(n: usize, rng: &mut StreamRng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiagentOutcome {
    pub control: Vec<f64>,
    pub value: f64,
    /// Σ_i |Û_i|
    pub evaluated: usize,
    pub per_coordinate: Vec<usize>,
}

/// One-coordinate-at-a-time minimization. For each coordinate `i` in
/// `order`, candidates move coordinate `i` of the current control by
/// `m·ρ_i` for `m ∈ Z`; coordinates already visited keep their new values.
/// Candidates failing `admits` are dropped. `q` evaluates a batch of
/// candidates.
pub fn multiagent_minimize<A, Q>(
    admits: A,
    incumbent: &[f64],
    config: &MultiagentConfig,
    order: &[usize],
    tie_tol: f64,
    stage: usize,
    q: Q,
) -> Result<MultiagentOutcome>
where
    A: Fn(&Vec<f64>) -> bool,
    Q: Fn(&[Vec<f64>]) -> Result<Vec<f64>>,
{
    if config.resolutions.len() != incumbent.len() {
        return Err(Error::Dimension {
            expected: config.resolutions.len(),
            actual: incumbent.len(),
        });
    }
    let mut current = incumbent.to_vec();
    let mut value = f64::NAN;
    let mut per_coordinate = Vec::with_capacity(order.len());
    for &i in order {
        let mut cands: Vec<Vec<f64>> = Vec::with_capacity(config.offsets.len());
        let mut inc = None;
        for &m in &config.offsets {
            let mut u = current.clone();
            if m != 0 {
                u[i] = incumbent[i] + f64::from(m) * config.resolutions[i];
            } else {
                inc = Some(cands.len());
            }
            if admits(&u) {
                cands.push(u);
            } else if m == 0 {
                inc = None;
            }
        }
        let Some(inc) = inc else {
            return Err(Error::EmptyCoordinateSet {
                stage,
                coordinate: i,
            });
        };
        let values = q(&cands)?;
        let j = pick(&values, inc, tie_tol);
        per_coordinate.push(cands.len());
        value = values[j];
        current = cands.swap_remove(j);
    }
    if order.is_empty() {
        value = q(std::slice::from_ref(&current))?[0];
    }
    Ok(MultiagentOutcome {
        control: current,
        value,
        evaluated: per_coordinate.iter().sum(),
        per_coordinate,
    })
}

/// Multiagent builder for problems with real-vector controls.
#[derive(Clone, Debug)]
pub struct MultiagentControlSet {
    pub config: MultiagentConfig,
}

impl MultiagentControlSet {
    pub fn new(config: MultiagentConfig) -> Result<Self> {
        config.validate()?;
        Ok(MultiagentControlSet { config })
    }
}

impl<P> ControlSetBuilder<P> for MultiagentControlSet
where
    P: ControlProblem<Control = Vec<f64>>,
{
    fn is_stochastic(&self) -> bool {
        self.config.order == CoordinateOrder::Permuted
    }

    fn select(&self, ctx: &StageContext<'_, P>, rng: &mut StreamRng) -> Result<Selection<Vec<f64>>> {
        let order = self.config.stage_order(rng);
        let out = multiagent_minimize(
            |u| ctx.problem.admits(ctx.stage, ctx.state, u),
            ctx.incumbent,
            &self.config,
            &order,
            ctx.tie_tol,
            ctx.stage,
            |c| ctx.q_values(c),
        )?;
        Ok(Selection {
            control: out.control,
            value: out.value,
            candidates_evaluated: out.evaluated,
        })
    }
}

/// Points `incumbent + diag(ρ)·z` for every `z ∈ Zⁿ`, in lexicographic
/// order of `z` (last coordinate fastest). The incumbent comes first.
pub fn product_grid(incumbent: &[f64], config: &MultiagentConfig) -> Vec<Vec<f64>> {
    let n = incumbent.len();
    let z = &config.offsets;
    let mut out = vec![incumbent.to_vec()];
    let mut digits = vec![0usize; n];
    loop {
        if digits.iter().any(|&d| z[d] != 0) {
            out.push(
                (0..n)
                    .map(|i| incumbent[i] + f64::from(z[digits[i]]) * config.resolutions[i])
                    .collect(),
            );
        }
        let Some(i) = (0..n).rev().find(|&i| digits[i] + 1 < z.len()) else {
            return out;
        };
        digits[i] += 1;
        digits[i + 1..].fill(0);
    }
}

/// Exhaustive search over the product grid around the incumbent. Refuses
/// grids with more than `cap` points.
#[derive(Clone, Debug)]
pub struct ProductGridControlSet {
    pub config: MultiagentConfig,
    pub cap: usize,
}

impl ProductGridControlSet {
    pub fn new(config: MultiagentConfig, cap: usize) -> Result<Self> {
        config.validate()?;
        Ok(ProductGridControlSet { config, cap })
    }
}

impl<P> ControlSetBuilder<P> for ProductGridControlSet
where
    P: ControlProblem<Control = Vec<f64>>,
{
    fn select(&self, ctx: &StageContext<'_, P>, _rng: &mut StreamRng) -> Result<Selection<Vec<f64>>> {
        let size = (self.config.offsets.len() as f64).powi(ctx.incumbent.len() as i32);
        if size > self.cap as f64 {
            return Err(Error::CapExceeded {
                estimate: size,
                cap: self.cap as f64,
            });
        }
        let mut set = product_grid(ctx.incumbent, &self.config);
        set.retain(|u| ctx.problem.admits(ctx.stage, ctx.state, u));
        ctx.minimize(set)
    }
}

#[derive(Clone, Debug)]
pub struct Improvement<S, U> {
    pub trajectory: Trajectory<S, U>,
    pub stage_times_ms: Vec<f64>,
    pub candidates: Vec<usize>,
}

/// One on-line improvement sweep from `x0` against `policy`.
pub fn improve_trajectory<P, B>(
    problem: &P,
    policy: &dyn Policy<P::State, P::Control>,
    x0: &P::State,
    builder: &B,
    tie_tol: f64,
    rng: &mut StreamRng,
) -> Result<Improvement<P::State, P::Control>>
where
    P: ControlProblem,
    B: ControlSetBuilder<P> + ?Sized,
{
    improve_with(problem, policy, x0, builder, tie_tol, true, rng)
}

fn improve_with<P, B>(
    problem: &P,
    policy: &dyn Policy<P::State, P::Control>,
    x0: &P::State,
    builder: &B,
    tie_tol: f64,
    memoize: bool,
    rng: &mut StreamRng,
) -> Result<Improvement<P::State, P::Control>>
where
    P: ControlProblem,
    B: ControlSetBuilder<P> + ?Sized,
{
    let n = problem.horizon();
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    let mut stage_times_ms = Vec::with_capacity(n);
    let mut candidates = Vec::with_capacity(n);
    states.push(x0.clone());
    for k in 0..n {
        let start = Instant::now();
        let incumbent = checked_action(problem, policy, k, &states[k])?;
        let ctx = StageContext {
            problem,
            policy,
            stage: k,
            state: &states[k],
            incumbent: &incumbent,
            tie_tol,
            memoize,
        };
        let sel = builder.select(&ctx, rng)?;
        let next = problem.step(k, &states[k], &sel.control);
        controls.push(sel.control);
        states.push(next);
        candidates.push(sel.candidates_evaluated);
        stage_times_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(Improvement {
        trajectory: Trajectory::new(states, controls),
        stage_times_ms,
        candidates,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineOptions {
    pub max_iters: usize,
    pub tie_tol: f64,
    /// Relative slack allowed before a cost increase is flagged.
    pub slack: f64,
    pub seed: u64,
    /// Record consistency failures instead of aborting.
    pub allow_inconsistent: bool,
    pub memoize: bool,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        OnlineOptions {
            max_iters: 10,
            tie_tol: 0.0,
            slack: 0.0,
            seed: 0,
            allow_inconsistent: false,
            memoize: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationEntry<S, U> {
    pub iteration: usize,
    /// Rollout of π^ℓ from x_0.
    #[serde(skip)]
    pub trajectory: Trajectory<S, U>,
    /// J_{π^ℓ}(x_0).
    pub cost: f64,
    /// Cost of the improved trajectory that produced π^ℓ.
    pub improved_cost: Option<f64>,
    pub stage_times_ms: Vec<f64>,
    pub candidates: Vec<usize>,
    /// Check of π^ℓ against the improved trajectory it was generated from.
    pub consistency: Option<ConsistencyReport<U>>,
    pub improvement_violation: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationHistory<S, U> {
    pub entries: Vec<IterationEntry<S, U>>,
    /// Generator check on the rollout of π^0.
    pub initial_consistency: ConsistencyReport<U>,
    pub generator: GeneratorKind,
    pub converged_at: Option<usize>,
    pub warnings: Vec<String>,
}

impl<S, U> IterationHistory<S, U> {
    pub fn costs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.cost).collect()
    }

    pub fn final_cost(&self) -> f64 {
        self.entries.last().map_or(f64::NAN, |e| e.cost)
    }

    pub fn has_improvement_violation(&self) -> bool {
        self.entries.iter().any(|e| e.improvement_violation)
    }

    /// Columns `iteration,cost`; costs use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,cost\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.iteration, e.cost));
        }
        out
    }
}

/// Runs on-line PI from `x0` starting with `pi0`.
///
/// Halts early at a fixed point when both generator and builder are
/// deterministic, the cost repeats within `tie_tol`, and the trajectory
/// repeats exactly.
pub fn run_online_pi<P, G, B>(
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
    let cost0 = trajectory_cost(problem, &traj0)?;
    let initial_consistency = check_consistency(problem, generator, &traj0, options.seed)?;
    let deterministic =
        generator.kind() == GeneratorKind::Deterministic && !builder.is_stochastic();

    let mut history = IterationHistory {
        entries: vec![IterationEntry {
            iteration: 0,
            trajectory: traj0,
            cost: cost0,
            improved_cost: None,
            stage_times_ms: Vec::new(),
            candidates: Vec::new(),
            consistency: None,
            improvement_violation: false,
        }],
        initial_consistency,
        generator: generator.kind(),
        converged_at: None,
        warnings: Vec::new(),
    };
    if !history.initial_consistency.passed() {
        history
            .warnings
            .push("generator failed the consistency check on the initial rollout".into());
    }

    let mut policy = pi0;
    for l in 0..options.max_iters {
        let mut r_improve = rng::stream(options.seed, "improve", l as u64);
        let imp = improve_with(
            problem,
            policy.as_ref(),
            x0,
            builder,
            options.tie_tol,
            options.memoize,
            &mut r_improve,
        )?;
        let improved_cost = trajectory_cost(problem, &imp.trajectory)?;

        let mut r_gen = rng::stream(options.seed, "generate", l as u64);
        let next = generator.generate(problem, &imp.trajectory, &mut r_gen)?;
        let report = policy_consistency(problem, &next, &imp.trajectory);
        if let Some(f) = report.first_failure() {
            if !options.allow_inconsistent {
                return Err(Error::ConsistencyViolation {
                    stage: f.stage,
                    expected: format!("{:?}", f.expected),
                    actual: f
                        .actual
                        .as_ref()
                        .map_or_else(|| "undefined".to_string(), |u| format!("{u:?}")),
                });
            }
            history.warnings.push(format!(
                "iteration {}: generated policy inconsistent at stage {}",
                l + 1,
                f.stage
            ));
        }

        let traj = rollout_policy(problem, &next, x0)?;
        let cost = trajectory_cost(problem, &traj)?;
        let prev = &history.entries[l];
        let violation = cost > prev.cost + options.slack * prev.cost.abs().max(1.0);
        if violation {
            history.warnings.push(format!(
                "iteration {}: cost rose from {} to {}",
                l + 1,
                prev.cost,
                cost
            ));
        }
        let fixed = deterministic
            && close(cost, prev.cost, options.tie_tol)
            && same_trajectory(problem, &traj, &prev.trajectory);

        history.entries.push(IterationEntry {
            iteration: l + 1,
            trajectory: traj,
            cost,
            improved_cost: Some(improved_cost),
            stage_times_ms: imp.stage_times_ms,
            candidates: imp.candidates,
            consistency: Some(report),
            improvement_violation: violation,
        });
        policy = next;
        if fixed {
            history.converged_at = Some(l + 1);
            break;
        }
    }
    Ok(history)
}
