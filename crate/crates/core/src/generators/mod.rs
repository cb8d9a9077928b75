//! Policy generators: maps from a feasible trajectory to a policy.
//!
//! A generator is consistent when the policy it returns reproduces the
//! source trajectory's control at each of that trajectory's own states.
//! [`check_consistency`] tests this directly.

mod regressor;
mod residual;

use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::model::{ControlProblem, Policy, SharedPolicy, Trajectory};
use crate::rng::{self, StreamRng};

pub use regressor::{Regressor, TrainingConfig};
pub use residual::{
    collect_replay_dataset, fit_residual, ReplayDataset, ReplaySample, ResidualGenerator,
    ResidualPolicy, SamplingParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Deterministic,
    Stochastic,
}

pub trait Generator<P: ControlProblem>: Sync {
    fn kind(&self) -> GeneratorKind;

    fn generate(
        &self,
        problem: &P,
        traj: &Trajectory<P::State, P::Control>,
        rng: &mut StreamRng,
    ) -> Result<SharedPolicy<P>>;
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyMismatch<U> {
    pub stage: usize,
    pub state: String,
    pub expected: U,
    pub actual: Option<U>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport<U> {
    pub stages_checked: usize,
    pub mismatches: Vec<ConsistencyMismatch<U>>,
}

impl<U> ConsistencyReport<U> {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn first_failure(&self) -> Option<&ConsistencyMismatch<U>> {
        self.mismatches.first()
    }
}

/// Evaluates μ_k(x_k) at every trajectory state and compares against u_k
/// through the problem's control encoding (bit-exact for real vectors).
pub fn policy_consistency<P, Q>(
    problem: &P,
    policy: &Q,
    traj: &Trajectory<P::State, P::Control>,
) -> ConsistencyReport<P::Control>
where
    P: ControlProblem,
    Q: Policy<P::State, P::Control> + ?Sized,
{
    let mut mismatches = Vec::new();
    for (k, expected) in traj.controls.iter().enumerate() {
        let x = &traj.states[k];
        let actual = policy.act(k, x);
        let ok = actual
            .as_ref()
            .is_some_and(|u| problem.same_control(u, expected));
        if !ok {
            mismatches.push(ConsistencyMismatch {
                stage: k,
                state: format!("{x:?}"),
                expected: expected.clone(),
                actual,
            });
        }
    }
    ConsistencyReport {
        stages_checked: traj.controls.len(),
        mismatches,
    }
}

/// Generates a policy from `traj` (seeded for stochastic generators) and
/// checks it against the trajectory.
pub fn check_consistency<P, G>(
    problem: &P,
    generator: &G,
    traj: &Trajectory<P::State, P::Control>,
    seed: u64,
) -> Result<ConsistencyReport<P::Control>>
where
    P: ControlProblem,
    G: Generator<P> + ?Sized,
{
    let mut r = rng::stream(seed, "consistency-check", 0);
    let policy = generator.generate(problem, traj, &mut r)?;
    Ok(policy_consistency(problem, &policy, traj))
}

/// State-independent replay μ_k(x) ≡ u_k.
#[derive(Clone, Debug)]
pub struct ReplayPolicy<U> {
    controls: Vec<U>,
}

impl<U> ReplayPolicy<U> {
    pub fn new(controls: Vec<U>) -> Self {
        ReplayPolicy { controls }
    }

    pub fn controls(&self) -> &[U] {
        &self.controls
    }
}

impl<S, U: Clone + Send + Sync> Policy<S, U> for ReplayPolicy<U> {
    fn act(&self, k: usize, _x: &S) -> Option<U> {
        self.controls.get(k).cloned()
    }
    fn stages(&self) -> Option<usize> {
        Some(self.controls.len())
    }
}

/// Replays the trajectory's controls regardless of state. Suited to
/// problems whose control sets do not depend on the state.
#[derive(Clone, Copy, Debug, Default)]
pub struct TabularGenerator;

pub fn tabular_generator<S, U: Clone>(traj: &Trajectory<S, U>) -> ReplayPolicy<U> {
    ReplayPolicy::new(traj.controls.clone())
}

impl<P> Generator<P> for TabularGenerator
where
    P: ControlProblem,
    P::Control: 'static,
{
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::Deterministic
    }

    fn generate(
        &self,
        _problem: &P,
        traj: &Trajectory<P::State, P::Control>,
        _rng: &mut StreamRng,
    ) -> Result<SharedPolicy<P>> {
        Ok(Arc::new(tabular_generator(traj)))
    }
}

type Encoder<S> = Arc<dyn Fn(&S) -> Vec<u8> + Send + Sync>;

/// Uses the trajectory's control at the trajectory's own state and defers
/// to a fixed fallback policy everywhere else.
pub struct OverlayPolicy<S, U> {
    keys: Vec<Vec<u8>>,
    controls: Vec<U>,
    fallback: Arc<dyn Policy<S, U>>,
    encode: Encoder<S>,
}

impl<S, U: Clone + Send + Sync> Policy<S, U> for OverlayPolicy<S, U> {
    fn act(&self, k: usize, x: &S) -> Option<U> {
        if self.keys.get(k).is_some_and(|key| *key == (self.encode)(x)) {
            return self.controls.get(k).cloned();
        }
        self.fallback.act(k, x)
    }
    fn stages(&self) -> Option<usize> {
        Some(self.controls.len())
    }
}

/// Consistent generator for problems with state-dependent control sets:
/// the trajectory is overlaid on a fixed fallback policy.
pub struct OverlayGenerator<P: ControlProblem> {
    fallback: SharedPolicy<P>,
}

impl<P: ControlProblem> OverlayGenerator<P> {
    pub fn new(fallback: SharedPolicy<P>) -> Self {
        OverlayGenerator { fallback }
    }
}

impl<P> Generator<P> for OverlayGenerator<P>
where
    P: ControlProblem + Clone + Send + 'static,
{
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::Deterministic
    }

    fn generate(
        &self,
        problem: &P,
        traj: &Trajectory<P::State, P::Control>,
        _rng: &mut StreamRng,
    ) -> Result<SharedPolicy<P>> {
        let p = problem.clone();
        Ok(Arc::new(OverlayPolicy {
            keys: traj.states[..traj.controls.len()]
                .iter()
                .map(|x| problem.encode_state(x))
                .collect(),
            controls: traj.controls.clone(),
            fallback: self.fallback.clone(),
            encode: Arc::new(move |x| p.encode_state(x)),
        }))
    }
}

struct OverridePolicy<S, U> {
    inner: Arc<dyn Policy<S, U>>,
    overrides: Vec<(usize, Vec<u8>, U)>,
    encode: Encoder<S>,
}

impl<S, U: Clone + Send + Sync> Policy<S, U> for OverridePolicy<S, U> {
    fn act(&self, k: usize, x: &S) -> Option<U> {
        let key = (self.encode)(x);
        for (stage, state, u) in &self.overrides {
            if *stage == k && *state == key {
                return Some(u.clone());
            }
        }
        self.inner.act(k, x)
    }
    fn stages(&self) -> Option<usize> {
        self.inner.stages()
    }
}

/// Wraps another generator and forces fixed controls at fixed
/// (stage, state) pairs. Used to build deliberately inconsistent
/// generators for negative tests.
pub struct OverrideGenerator<P: ControlProblem, G> {
    inner: G,
    overrides: Vec<(usize, P::State, P::Control)>,
}

impl<P: ControlProblem, G> OverrideGenerator<P, G> {
    pub fn new(inner: G, overrides: Vec<(usize, P::State, P::Control)>) -> Self {
        OverrideGenerator { inner, overrides }
    }
}

impl<P, G> Generator<P> for OverrideGenerator<P, G>
where
    P: ControlProblem + Clone + Send + 'static,
    G: Generator<P>,
{
    fn kind(&self) -> GeneratorKind {
        self.inner.kind()
    }

    fn generate(
        &self,
        problem: &P,
        traj: &Trajectory<P::State, P::Control>,
        rng: &mut StreamRng,
    ) -> Result<SharedPolicy<P>> {
        let inner = self.inner.generate(problem, traj, rng)?;
        let p = problem.clone();
        Ok(Arc::new(OverridePolicy {
            inner,
            overrides: self
                .overrides
                .iter()
                .map(|(k, x, u)| (*k, problem.encode_state(x), u.clone()))
                .collect(),
            encode: Arc::new(move |x| p.encode_state(x)),
        }))
    }
}
