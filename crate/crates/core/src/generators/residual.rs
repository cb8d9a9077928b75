//! Learned residual generator for problems with real-vector states and
//! box-bounded real-vector controls.
//!
//! A replay dataset is collected by perturbing trajectory states and
//! picking, among sampled controls, the one with the lowest one-step
//! lookahead value under the replay policy. A regressor is fit to the
//! correction `ū − u_k`. The resulting policy adds the learned correction
//! relative to its value at the trajectory state, so at `x_k` it returns
//! `u_k` exactly.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Generator, GeneratorKind, ReplayPolicy};
use crate::error::{Error, Result};
use crate::model::{policy_cost_to_go, ControlBounds, ControlProblem, Policy, SharedPolicy, Trajectory};
use crate::par;
use crate::rng::{self, StreamRng};

use super::regressor::{Regressor, TrainingConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    /// Perturbed states per stage.
    pub states_per_stage: usize,
    /// Per-stage override of `states_per_stage`, indexed by stage.
    #[serde(default)]
    pub stage_counts: Option<Vec<usize>>,
    /// Sampled controls per perturbed state, in addition to `u_k`.
    pub controls_per_state: usize,
    /// Per-coordinate state perturbation; defaults to a tenth of the
    /// trajectory's extent in each coordinate (at least 0.1).
    #[serde(default)]
    pub state_sigma: Option<Vec<f64>>,
    /// Per-coordinate control perturbation; defaults to a fifth of the box
    /// half-width.
    #[serde(default)]
    pub control_sigma: Option<Vec<f64>>,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            states_per_stage: 16,
            stage_counts: None,
            controls_per_state: 16,
            state_sigma: None,
            control_sigma: None,
        }
    }
}

impl SamplingParams {
    fn count(&self, k: usize) -> usize {
        self.stage_counts
            .as_ref()
            .and_then(|c| c.get(k).copied())
            .unwrap_or(self.states_per_stage)
    }

    fn state_sigma(&self, traj: &Trajectory<Vec<f64>, Vec<f64>>) -> Result<Vec<f64>> {
        let dim = traj.states[0].len();
        if let Some(s) = &self.state_sigma {
            if s.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: s.len(),
                });
            }
            return Ok(s.clone());
        }
        Ok((0..dim)
            .map(|i| {
                let (lo, hi) = traj
                    .states
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x[i]), hi.max(x[i]))
                    });
                0.1 * (hi - lo).max(1.0)
            })
            .collect())
    }

    fn control_sigma(&self, bounds: &ControlBounds) -> Result<Vec<f64>> {
        if let Some(s) = &self.control_sigma {
            if s.len() != bounds.dim() {
                return Err(Error::Dimension {
                    expected: bounds.dim(),
                    actual: s.len(),
                });
            }
            return Ok(s.clone());
        }
        Ok((0..bounds.dim())
            .map(|i| 0.2 * bounds.half_width(i).max(1e-12))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplaySample {
    pub k: usize,
    pub state: Vec<f64>,
    pub control: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayDataset {
    pub state_dim: usize,
    pub control_dim: usize,
    pub samples: Vec<ReplaySample>,
}

impl ReplayDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Columns `k,x0..,u0..`; values use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k");
        for i in 0..self.state_dim {
            let _ = write!(out, ",x{i}");
        }
        for i in 0..self.control_dim {
            let _ = write!(out, ",u{i}");
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{}", s.k);
            for v in s.state.iter().chain(&s.control) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))?
            .split(',')
            .collect();
        if header.first() != Some(&"k") {
            return Err(Error::Parse("first column must be `k`".into()));
        }
        let state_dim = header.iter().filter(|h| h.starts_with('x')).count();
        let control_dim = header.iter().filter(|h| h.starts_with('u')).count();
        if state_dim + control_dim + 1 != header.len() {
            return Err(Error::Parse("unrecognised columns in header".into()));
        }
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Parse(format!("malformed row {}", i + 2));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != header.len() {
                return Err(bad());
            }
            let k = cols[0].parse().map_err(|_| bad())?;
            let vals = cols[1..]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            samples.push(ReplaySample {
                k,
                state: vals[..state_dim].to_vec(),
                control: vals[state_dim..].to_vec(),
            });
        }
        Ok(ReplayDataset {
            state_dim,
            control_dim,
            samples,
        })
    }
}

fn bounds_at<P>(problem: &P, k: usize, x: &Vec<f64>) -> Result<ControlBounds>
where
    P: ControlProblem<State = Vec<f64>, Control = Vec<f64>>,
{
    problem
        .control_bounds(k, x)
        .ok_or(Error::NoControlBounds { stage: k })
}

/// Builds the replay dataset for stages `1..N`. Each (stage, sample) pair
/// draws from its own random stream.
pub fn collect_replay_dataset<P>(
    problem: &P,
    traj: &Trajectory<Vec<f64>, Vec<f64>>,
    params: &SamplingParams,
    seed: u64,
) -> Result<ReplayDataset>
where
    P: ControlProblem<State = Vec<f64>, Control = Vec<f64>>,
{
    let n = problem.horizon();
    let state_sigma = params.state_sigma(traj)?;
    let replay = ReplayPolicy::new(traj.controls.clone());
    let jobs: Vec<(usize, usize)> = (1..n)
        .flat_map(|k| (0..params.count(k)).map(move |j| (k, j)))
        .collect();

    let samples = par::try_map(&jobs, |&(k, j)| -> Result<ReplaySample> {
        let mut r = rng::stream(seed, "replay-dataset", ((k as u64) << 32) | j as u64);
        let x: Vec<f64> = traj.states[k]
            .iter()
            .zip(&state_sigma)
            .map(|(c, s)| c + s * r.sample::<f64, _>(StandardNormal))
            .collect();
        let bounds = bounds_at(problem, k, &x)?;
        let control_sigma = params.control_sigma(&bounds)?;
        let base = &traj.controls[k];

        let mut best_u = base.clone();
        let mut best_q = lookahead(problem, &replay, k, &x, &best_u)?;
        for _ in 0..params.controls_per_state {
            let mut u: Vec<f64> = base
                .iter()
                .zip(&control_sigma)
                .map(|(c, s)| c + s * r.sample::<f64, _>(StandardNormal))
                .collect();
            bounds.saturate(&mut u);
            if !problem.admits(k, &x, &u) {
                continue;
            }
            let v = lookahead(problem, &replay, k, &x, &u)?;
            if v < best_q {
                best_q = v;
                best_u = u;
            }
        }
        Ok(ReplaySample {
            k,
            state: x,
            control: best_u,
        })
    })?;

    Ok(ReplayDataset {
        state_dim: traj.states[0].len(),
        control_dim: traj.controls.first().map_or(0, Vec::len),
        samples,
    })
}

fn lookahead<P>(
    problem: &P,
    replay: &ReplayPolicy<Vec<f64>>,
    k: usize,
    x: &Vec<f64>,
    u: &Vec<f64>,
) -> Result<f64>
where
    P: ControlProblem<State = Vec<f64>, Control = Vec<f64>>,
{
    let next = problem.step(k, x, u);
    Ok(problem.stage_cost(k, x, u) + policy_cost_to_go(problem, replay, &next, k + 1)?)
}

/// μ_k(x) = sat(u_k + F(x − x_k, k/N) − F(0, k/N)), with the correction
/// skipped entirely when it is exactly zero.
#[derive(Clone, Debug)]
pub struct ResidualPolicy {
    anchors: Vec<Vec<f64>>,
    controls: Vec<Vec<f64>>,
    bounds: Vec<ControlBounds>,
    offsets: Vec<Vec<f64>>,
    model: Arc<Regressor>,
}

impl ResidualPolicy {
    pub fn regressor(&self) -> &Regressor {
        &self.model
    }

    fn features(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let mut f: Vec<f64> = x.iter().zip(&self.anchors[k]).map(|(a, b)| a - b).collect();
        f.push(k as f64 / self.controls.len() as f64);
        f
    }
}

impl Policy<Vec<f64>, Vec<f64>> for ResidualPolicy {
    fn act(&self, k: usize, x: &Vec<f64>) -> Option<Vec<f64>> {
        let base = self.controls.get(k)?;
        if x.len() != self.anchors[k].len() {
            return None;
        }
        let out = self.model.predict(&self.features(k, x));
        let e: Vec<f64> = out.iter().zip(&self.offsets[k]).map(|(a, b)| a - b).collect();
        if e.iter().all(|&v| v == 0.0) {
            return Some(base.clone());
        }
        let mut u: Vec<f64> = base.iter().zip(&e).map(|(a, b)| a + b).collect();
        self.bounds[k].saturate(&mut u);
        Some(u)
    }

    fn stages(&self) -> Option<usize> {
        Some(self.controls.len())
    }
}

/// Trains a regressor on `dataset` and wraps it as a residual policy
/// anchored on `traj`.
pub fn fit_residual<P>(
    problem: &P,
    traj: &Trajectory<Vec<f64>, Vec<f64>>,
    dataset: &ReplayDataset,
    params: &SamplingParams,
    config: &TrainingConfig,
    rng: &mut StreamRng,
) -> Result<ResidualPolicy>
where
    P: ControlProblem<State = Vec<f64>, Control = Vec<f64>>,
{
    let n = traj.horizon();
    let state_dim = traj.states[0].len();
    let bounds = (0..n)
        .map(|k| bounds_at(problem, k, &traj.states[k]))
        .collect::<Result<Vec<_>>>()?;
    let control_dim = bounds.first().map_or(0, ControlBounds::dim);
    if dataset.state_dim != state_dim {
        return Err(Error::Dimension {
            expected: state_dim,
            actual: dataset.state_dim,
        });
    }
    if dataset.control_dim != control_dim {
        return Err(Error::Dimension {
            expected: control_dim,
            actual: dataset.control_dim,
        });
    }

    let mut input_scale: Vec<f64> = params
        .state_sigma(traj)?
        .into_iter()
        .map(|s| if s > 0.0 { s } else { 1.0 })
        .collect();
    input_scale.push(1.0);
    let output_scale: Vec<f64> = match bounds.first() {
        Some(b) => (0..b.dim()).map(|i| b.half_width(i).max(1e-12)).collect(),
        None => Vec::new(),
    };
    // With nothing to learn from, a zero network keeps the policy a pure replay.
    let zero = config.zero_init || dataset.is_empty();
    let mut model = Regressor::new(input_scale, output_scale, &config.hidden, zero, rng);

    let mut inputs = Vec::with_capacity(dataset.len());
    let mut targets = Vec::with_capacity(dataset.len());
    for s in dataset.samples.iter().filter(|s| s.k < n) {
        let mut f: Vec<f64> = s.state.iter().zip(&traj.states[s.k]).map(|(a, b)| a - b).collect();
        f.push(s.k as f64 / n as f64);
        inputs.push(f);
        targets.push(s.control.iter().zip(&traj.controls[s.k]).map(|(a, b)| a - b).collect());
    }
    model.train(&inputs, &targets, config, rng)?;

    let mut policy = ResidualPolicy {
        anchors: traj.states[..n].to_vec(),
        controls: traj.controls.clone(),
        bounds,
        offsets: Vec::new(),
        model: Arc::new(model),
    };
    policy.offsets = (0..n)
        .map(|k| policy.model.predict(&policy.features(k, &traj.states[k])))
        .collect();
    Ok(policy)
}

/// Stochastic generator: collect a replay dataset, fit the residual.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualGenerator {
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default)]
    pub training: TrainingConfig,
}

impl<P> Generator<P> for ResidualGenerator
where
    P: ControlProblem<State = Vec<f64>, Control = Vec<f64>>,
{
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::Stochastic
    }

    fn generate(
        &self,
        problem: &P,
        traj: &Trajectory<Vec<f64>, Vec<f64>>,
        rng: &mut StreamRng,
    ) -> Result<SharedPolicy<P>> {
        let dataset = collect_replay_dataset(problem, traj, &self.sampling, rng.next_u64())?;
        let policy = fit_residual(problem, traj, &dataset, &self.sampling, &self.training, rng)?;
        Ok(Arc::new(policy))
    }
}
