//! Deterministic finite-horizon control problems, trajectories, policies and
//! their evaluation.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box of admissible controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ControlBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        ControlBounds { lower, upper }
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Self {
        ControlBounds::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }

    /// Clamps each coordinate into the box. Coordinates already inside are
    /// returned bit-for-bit unchanged.
    pub fn saturate(&self, u: &mut [f64]) {
        for (v, (&lo, &hi)) in u.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            if *v < lo {
                *v = lo;
            } else if *v > hi {
                *v = hi;
            }
        }
    }

    pub fn half_width(&self, i: usize) -> f64 {
        0.5 * (self.upper[i] - self.lower[i])
    }
}

/// A deterministic N-stage optimal control problem.
///
/// States and controls are opaque; the problem supplies byte encodings used
/// for hashing and equality.
pub trait ControlProblem: Sync {
    type State: Clone + Debug + Send + Sync;
    type Control: Clone + Debug + Send + Sync;

    fn horizon(&self) -> usize;

    /// x_{k+1} = f_k(x_k, u_k)
    fn step(&self, k: usize, x: &Self::State, u: &Self::Control) -> Self::State;

    fn stage_cost(&self, k: usize, x: &Self::State, u: &Self::Control) -> f64;

    fn terminal_cost(&self, x: &Self::State) -> f64;

    /// Membership test u ∈ U_k(x).
    fn admits(&self, k: usize, x: &Self::State, u: &Self::Control) -> bool;

    /// Enumerates U_k(x) when it is finite.
    fn controls(&self, _k: usize, _x: &Self::State) -> Option<Vec<Self::Control>> {
        None
    }

    /// Box bounds of U_k(x) for Euclidean control sets.
    fn control_bounds(&self, _k: usize, _x: &Self::State) -> Option<ControlBounds> {
        None
    }

    fn encode_state(&self, x: &Self::State) -> Vec<u8>;

    fn encode_control(&self, u: &Self::Control) -> Vec<u8>;

    fn same_state(&self, a: &Self::State, b: &Self::State) -> bool {
        self.encode_state(a) == self.encode_state(b)
    }

    fn same_control(&self, a: &Self::Control, b: &Self::Control) -> bool {
        self.encode_control(a) == self.encode_control(b)
    }
}

/// A stagewise feedback law π = {μ_0, …, μ_{N-1}}.
pub trait Policy<S, U>: Send + Sync {
    /// μ_k(x); `None` when the policy is undefined at `x`.
    fn act(&self, k: usize, x: &S) -> Option<U>;

    /// Number of stages the policy was built for, if it is stage-limited.
    fn stages(&self) -> Option<usize> {
        None
    }
}

pub type SharedPolicy<P> =
    Arc<dyn Policy<<P as ControlProblem>::State, <P as ControlProblem>::Control>>;

impl<S, U, T: Policy<S, U> + ?Sized> Policy<S, U> for Arc<T> {
    fn act(&self, k: usize, x: &S) -> Option<U> {
        (**self).act(k, x)
    }
    fn stages(&self) -> Option<usize> {
        (**self).stages()
    }
}

impl<S, U, T: Policy<S, U> + ?Sized> Policy<S, U> for &T {
    fn act(&self, k: usize, x: &S) -> Option<U> {
        (**self).act(k, x)
    }
    fn stages(&self) -> Option<usize> {
        (**self).stages()
    }
}

/// Policy backed by a closure.
pub struct FnPolicy<F> {
    f: F,
    stages: Option<usize>,
}

impl<F> FnPolicy<F> {
    pub fn new(f: F) -> Self {
        FnPolicy { f, stages: None }
    }

    pub fn with_stages(f: F, stages: usize) -> Self {
        FnPolicy {
            f,
            stages: Some(stages),
        }
    }
}

impl<S, U, F> Policy<S, U> for FnPolicy<F>
where
    F: Fn(usize, &S) -> Option<U> + Send + Sync,
{
    fn act(&self, k: usize, x: &S) -> Option<U> {
        (self.f)(k, x)
    }
    fn stages(&self) -> Option<usize> {
        self.stages
    }
}

/// A feasible sequence {x_0, u_0, x_1, …, u_{N-1}, x_N}.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S, U> {
    pub states: Vec<S>,
    pub controls: Vec<U>,
}

impl<S, U> Trajectory<S, U> {
    pub fn new(states: Vec<S>, controls: Vec<U>) -> Self {
        Trajectory { states, controls }
    }

    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    pub fn initial_state(&self) -> &S {
        &self.states[0]
    }

    pub fn terminal_state(&self) -> &S {
        self.states.last().expect("trajectory has at least one state")
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord<S, U> {
    k: usize,
    state: S,
    control: Option<U>,
}

impl<S: Serialize + Clone, U: Serialize + Clone> Trajectory<S, U> {
    /// JSON array of `{k, state, control}` records; the final record holds
    /// the terminal state with a null control.
    pub fn to_json(&self) -> Result<String> {
        let mut records = Vec::with_capacity(self.states.len());
        for (k, x) in self.states.iter().enumerate() {
            records.push(TrajectoryRecord {
                k,
                state: x.clone(),
                control: self.controls.get(k).cloned(),
            });
        }
        Ok(serde_json::to_string_pretty(&records)?)
    }
}

impl<S: DeserializeOwned, U: DeserializeOwned> Trajectory<S, U> {
    pub fn from_json(text: &str) -> Result<Self> {
        let records: Vec<TrajectoryRecord<S, U>> = serde_json::from_str(text)?;
        let n = records.len();
        if n == 0 {
            return Err(Error::Parse("empty trajectory".into()));
        }
        let mut states = Vec::with_capacity(n);
        let mut controls = Vec::with_capacity(n - 1);
        for (i, r) in records.into_iter().enumerate() {
            if r.k != i {
                return Err(Error::Parse(format!("record {i} has k = {}", r.k)));
            }
            states.push(r.state);
            match (r.control, i + 1 == n) {
                (Some(u), false) => controls.push(u),
                (None, true) => {}
                (Some(_), true) => {
                    return Err(Error::Parse("terminal record carries a control".into()))
                }
                (None, false) => return Err(Error::Parse(format!("record {i} lacks a control"))),
            }
        }
        Ok(Trajectory { states, controls })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DynamicsMismatch,
    ConstraintViolation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feasibility {
    Clean,
    Violated { stage: usize, kind: ViolationKind },
}

impl Feasibility {
    pub fn is_clean(&self) -> bool {
        matches!(self, Feasibility::Clean)
    }
}

fn check_shape<P: ControlProblem>(
    problem: &P,
    traj: &Trajectory<P::State, P::Control>,
) -> Result<()> {
    let n = problem.horizon();
    if traj.controls.len() != n || traj.states.len() != n + 1 {
        return Err(Error::Shape {
            expected_states: n + 1,
            expected_controls: n,
            states: traj.states.len(),
            controls: traj.controls.len(),
        });
    }
    Ok(())
}

/// Reports the first stage whose control is inadmissible or whose successor
/// state disagrees with the dynamics.
pub fn is_feasible<P: ControlProblem>(
    problem: &P,
    traj: &Trajectory<P::State, P::Control>,
) -> Result<Feasibility> {
    check_shape(problem, traj)?;
    for k in 0..problem.horizon() {
        let (x, u) = (&traj.states[k], &traj.controls[k]);
        if !problem.admits(k, x, u) {
            return Ok(Feasibility::Violated {
                stage: k,
                kind: ViolationKind::ConstraintViolation,
            });
        }
        let next = problem.step(k, x, u);
        if !problem.same_state(&next, &traj.states[k + 1]) {
            return Ok(Feasibility::Violated {
                stage: k,
                kind: ViolationKind::DynamicsMismatch,
            });
        }
    }
    Ok(Feasibility::Clean)
}

fn check_policy_stages<P: ControlProblem, Q: Policy<P::State, P::Control> + ?Sized>(
    problem: &P,
    policy: &Q,
) -> Result<()> {
    match policy.stages() {
        Some(s) if s != problem.horizon() => Err(Error::HorizonMismatch {
            policy: s,
            horizon: problem.horizon(),
        }),
        _ => Ok(()),
    }
}

/// Queries μ_k(x) and checks membership.
pub fn checked_action<P, Q>(problem: &P, policy: &Q, k: usize, x: &P::State) -> Result<P::Control>
where
    P: ControlProblem,
    Q: Policy<P::State, P::Control> + ?Sized,
{
    let u = policy.act(k, x).ok_or_else(|| Error::UndefinedPolicy {
        stage: k,
        state: format!("{x:?}"),
    })?;
    if !problem.admits(k, x, &u) {
        return Err(Error::InfeasibleControl {
            stage: k,
            control: format!("{u:?}"),
        });
    }
    Ok(u)
}

/// Simulates `policy` from `x0` over the full horizon.
pub fn rollout_policy<P, Q>(
    problem: &P,
    policy: &Q,
    x0: &P::State,
) -> Result<Trajectory<P::State, P::Control>>
where
    P: ControlProblem,
    Q: Policy<P::State, P::Control> + ?Sized,
{
    check_policy_stages(problem, policy)?;
    let n = problem.horizon();
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    states.push(x0.clone());
    for k in 0..n {
        let u = checked_action(problem, policy, k, &states[k])?;
        let next = problem.step(k, &states[k], &u);
        controls.push(u);
        states.push(next);
    }
    Ok(Trajectory { states, controls })
}

/// g_N(x_N) + Σ g_k(x_k, u_k). Stage costs are accumulated forward and the
/// terminal cost added last, the same order as [`policy_cost_to_go`].
pub fn trajectory_cost<P: ControlProblem>(
    problem: &P,
    traj: &Trajectory<P::State, P::Control>,
) -> Result<f64> {
    match is_feasible(problem, traj)? {
        Feasibility::Clean => Ok(unchecked_trajectory_cost(problem, traj)),
        Feasibility::Violated { stage, kind } => Err(Error::InfeasibleTrajectory {
            stage,
            kind: format!("{kind:?}"),
        }),
    }
}

pub(crate) fn unchecked_trajectory_cost<P: ControlProblem>(
    problem: &P,
    traj: &Trajectory<P::State, P::Control>,
) -> f64 {
    let mut acc = 0.0;
    for (k, u) in traj.controls.iter().enumerate() {
        acc += problem.stage_cost(k, &traj.states[k], u);
    }
    acc + problem.terminal_cost(traj.terminal_state())
}

/// J_{k,π}(x): cost of running `policy` from state `x` at stage `k`.
pub fn policy_cost_to_go<P, Q>(problem: &P, policy: &Q, x: &P::State, k: usize) -> Result<f64>
where
    P: ControlProblem,
    Q: Policy<P::State, P::Control> + ?Sized,
{
    let n = problem.horizon();
    assert!(k <= n, "stage {k} beyond horizon {n}");
    let mut acc = 0.0;
    let mut x = x.clone();
    for j in k..n {
        let u = checked_action(problem, policy, j, &x)?;
        acc += problem.stage_cost(j, &x, &u);
        x = problem.step(j, &x, &u);
    }
    Ok(acc + problem.terminal_cost(&x))
}

/// Whether two trajectories agree stage by stage under the problem's
/// encodings.
pub fn same_trajectory<P: ControlProblem>(
    problem: &P,
    a: &Trajectory<P::State, P::Control>,
    b: &Trajectory<P::State, P::Control>,
) -> bool {
    a.states.len() == b.states.len()
        && a.controls.len() == b.controls.len()
        && a.states.iter().zip(&b.states).all(|(x, y)| problem.same_state(x, y))
        && a.controls
            .iter()
            .zip(&b.controls)
            .all(|(u, v)| problem.same_control(u, v))
}

/// Per-stage cost-to-go values keyed by state encoding.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostToGoTable {
    pub stages: Vec<BTreeMap<Vec<u8>, f64>>,
}

impl CostToGoTable {
    pub fn with_horizon(n: usize) -> Self {
        CostToGoTable {
            stages: vec![BTreeMap::new(); n + 1],
        }
    }

    pub fn get(&self, k: usize, encoded: &[u8]) -> Option<f64> {
        self.stages.get(k)?.get(encoded).copied()
    }

    pub fn value<P: ControlProblem>(&self, problem: &P, k: usize, x: &P::State) -> Option<f64> {
        self.get(k, &problem.encode_state(x))
    }

    pub fn insert(&mut self, k: usize, encoded: Vec<u8>, value: f64) {
        self.stages[k].insert(encoded, value);
    }

    pub fn len(&self) -> usize {
        self.stages.iter().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest absolute difference over the keys both tables share; `None`
    /// if the key sets differ.
    pub fn max_abs_diff(&self, other: &CostToGoTable) -> Option<f64> {
        if self.stages.len() != other.stages.len() {
            return None;
        }
        let mut worst = 0.0f64;
        for (a, b) in self.stages.iter().zip(&other.stages) {
            if a.len() != b.len() {
                return None;
            }
            for (key, va) in a {
                let vb = b.get(key)?;
                worst = worst.max((va - vb).abs());
            }
        }
        Some(worst)
    }

    /// CSV with columns `stage,state_encoding,value`; encodings are hex.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,state_encoding,value\n");
        for (k, stage) in self.stages.iter().enumerate() {
            for (key, v) in stage {
                let _ = writeln!(out, "{k},{},{v}", hex::encode(key));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some("stage,state_encoding,value") => {}
            other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
        }
        let mut stages: Vec<BTreeMap<Vec<u8>, f64>> = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Parse(format!("malformed row {}", i + 2));
            let mut parts = line.split(',');
            let k: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let key = hex::decode(parts.next().ok_or_else(bad)?).map_err(|_| bad())?;
            let v: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if stages.len() <= k {
                stages.resize(k + 1, BTreeMap::new());
            }
            stages[k].insert(key, v);
        }
        Ok(CostToGoTable { stages })
    }
}

/// Relative closeness used throughout for floating comparisons:
/// |a − b| ≤ tol · max(1, |b|).
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

pub(crate) fn encode_f64s(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    out
}
