//! Single- and multi-drone path planning with double-integrator dynamics,
//! obstacle repulsion and pairwise separation costs.
//!
//! The state stacks `(p, v)` per drone (6m entries) and the control stacks
//! the accelerations (3m entries).

mod scenario;

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::generators::ResidualGenerator;
use crate::model::{encode_f64s, ControlBounds, ControlProblem, Policy, SharedPolicy, Trajectory};
use crate::online::{
    permuted_coordinate_order, run_online_pi, CoordinateOrder, IterationHistory,
    MultiagentConfig, MultiagentControlSet, OnlineOptions, CONTINUOUS_TIE_TOL,
};
use crate::rng;

pub use scenario::{
    bundled_scenario, AccelBounds, CostWeights, DroneScenario, DroneSpec, MultiagentParams,
    Obstacle, PdGains, BUNDLED,
};

/// Per drone: p' = p + v·dt + ½·a·dt², v' = v + a·dt.
pub fn double_integrator_step(state: &[f64], control: &[f64], dt: f64) -> Result<Vec<f64>> {
    if state.len() % 6 != 0 {
        return Err(Error::Dimension {
            expected: 6 * (state.len() / 6 + 1),
            actual: state.len(),
        });
    }
    if control.len() * 2 != state.len() {
        return Err(Error::Dimension {
            expected: state.len() / 2,
            actual: control.len(),
        });
    }
    Ok(integrate(state, control, dt))
}

fn integrate(state: &[f64], control: &[f64], dt: f64) -> Vec<f64> {
    let mut next = state.to_vec();
    for (d, a) in control.chunks_exact(3).enumerate() {
        let s = &mut next[6 * d..6 * d + 6];
        for i in 0..3 {
            let v = s[3 + i];
            s[i] += v * dt + 0.5 * a[i] * dt * dt;
            s[3 + i] = v + a[i] * dt;
        }
    }
    next
}

/// ½·η·(1/d − 1/d₀)² for d < d₀, zero otherwise; d is clamped below at
/// `floor`.
pub fn barrier(d: f64, gain: f64, d0: f64, floor: f64) -> f64 {
    if d >= d0 {
        return 0.0;
    }
    let d = d.max(floor);
    0.5 * gain * (1.0 / d - 1.0 / d0).powi(2)
}

fn position(x: &[f64], d: usize) -> &[f64] {
    &x[6 * d..6 * d + 3]
}

pub fn drone_stage_cost(s: &DroneScenario, x: &[f64], u: &[f64]) -> f64 {
    let w = &s.weights;
    let effort: f64 = u.iter().map(|a| a * a).sum();
    let mut cost = w.control * effort;
    let m = u.len() / 3;
    for d in 0..m {
        let p = position(x, d);
        for o in &s.obstacles {
            cost += barrier(o.distance(p), w.repulsion_gain, w.influence_radius, w.distance_floor);
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            let (a, b) = (position(x, i), position(x, j));
            let dist = (0..3).map(|t| (a[t] - b[t]).powi(2)).sum::<f64>().sqrt();
            cost += barrier(dist, w.separation_gain, w.separation_threshold, w.distance_floor);
        }
    }
    cost
}

pub fn drone_terminal_cost(s: &DroneScenario, x: &[f64]) -> f64 {
    let w = &s.weights;
    let mut cost = 0.0;
    for (d, spec) in s.drones.iter().enumerate() {
        let st = &x[6 * d..6 * d + 6];
        let dp: f64 = (0..3).map(|i| (st[i] - spec.goal[i]).powi(2)).sum();
        let v: f64 = st[3..].iter().map(|c| c * c).sum();
        cost += w.terminal_position * dp + w.terminal_velocity * v;
    }
    cost
}

#[derive(Clone, Debug)]
pub struct DroneProblem {
    scenario: Arc<DroneScenario>,
    bounds: ControlBounds,
}

impl DroneProblem {
    pub fn new(scenario: DroneScenario) -> Result<Self> {
        scenario.validate()?;
        let bounds = scenario.control_bounds();
        Ok(DroneProblem {
            scenario: Arc::new(scenario),
            bounds,
        })
    }

    pub fn scenario(&self) -> &DroneScenario {
        &self.scenario
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.scenario.initial_state()
    }

    /// Whether each drone's final position lies in its goal box.
    pub fn goals_reached(&self, x: &[f64]) -> Vec<bool> {
        self.scenario
            .drones
            .iter()
            .enumerate()
            .map(|(d, spec)| {
                let p = position(x, d);
                (0..3).all(|i| (p[i] - spec.goal[i]).abs() <= spec.goal_half_extents[i])
            })
            .collect()
    }

    /// Per-drone CSV with columns `k,t,px,py,pz,vx,vy,vz,ax,ay,az`. The
    /// terminal row leaves the acceleration columns empty.
    pub fn trajectory_csv(&self, traj: &Trajectory<Vec<f64>, Vec<f64>>, drone: usize) -> String {
        let mut out = String::from("k,t,px,py,pz,vx,vy,vz,ax,ay,az\n");
        for (k, x) in traj.states.iter().enumerate() {
            let _ = write!(out, "{k},{}", k as f64 * self.scenario.dt);
            for v in &x[6 * drone..6 * drone + 6] {
                let _ = write!(out, ",{v}");
            }
            match traj.controls.get(k) {
                Some(u) => {
                    for a in &u[3 * drone..3 * drone + 3] {
                        let _ = write!(out, ",{a}");
                    }
                }
                None => out.push_str(",,,"),
            }
            out.push('\n');
        }
        out
    }
}

impl ControlProblem for DroneProblem {
    type State = Vec<f64>;
    type Control = Vec<f64>;

    fn horizon(&self) -> usize {
        self.scenario.horizon
    }

    fn step(&self, _k: usize, x: &Vec<f64>, u: &Vec<f64>) -> Vec<f64> {
        integrate(x, u, self.scenario.dt)
    }

    fn stage_cost(&self, _k: usize, x: &Vec<f64>, u: &Vec<f64>) -> f64 {
        drone_stage_cost(&self.scenario, x, u)
    }

    fn terminal_cost(&self, x: &Vec<f64>) -> f64 {
        drone_terminal_cost(&self.scenario, x)
    }

    fn admits(&self, _k: usize, _x: &Vec<f64>, u: &Vec<f64>) -> bool {
        self.bounds.contains(u)
    }

    fn control_bounds(&self, _k: usize, _x: &Vec<f64>) -> Option<ControlBounds> {
        Some(self.bounds.clone())
    }

    fn encode_state(&self, x: &Vec<f64>) -> Vec<u8> {
        encode_f64s(x)
    }

    fn encode_control(&self, u: &Vec<f64>) -> Vec<u8> {
        encode_f64s(u)
    }
}

/// Saturated PD law toward each drone's goal:
/// a = clamp(K_p·(p_goal − p) − K_d·v).
#[derive(Clone, Debug)]
pub struct PdPolicy {
    goals: Vec<[f64; 3]>,
    gains: PdGains,
    bounds: ControlBounds,
}

pub fn heuristic_base_policy(scenario: &DroneScenario) -> PdPolicy {
    PdPolicy {
        goals: scenario.drones.iter().map(|d| d.goal).collect(),
        gains: scenario.base_policy.clone(),
        bounds: scenario.control_bounds(),
    }
}

impl Policy<Vec<f64>, Vec<f64>> for PdPolicy {
    fn act(&self, _k: usize, x: &Vec<f64>) -> Option<Vec<f64>> {
        if x.len() != 6 * self.goals.len() {
            return None;
        }
        let mut u = Vec::with_capacity(3 * self.goals.len());
        for (d, g) in self.goals.iter().enumerate() {
            let s = &x[6 * d..6 * d + 6];
            for i in 0..3 {
                u.push(self.gains.kp * (g[i] - s[i]) - self.gains.kd * s[3 + i]);
            }
        }
        self.bounds.saturate(&mut u);
        Some(u)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleOrder {
    Fixed,
    Permuted,
}

/// Control-coordinate order for the multiagent step: drone-major with axes
/// x, y, z (0-based indices), or a seeded permutation of it.
pub fn sequential_agent_schedule(m: usize, order: ScheduleOrder, seed: u64) -> Vec<usize> {
    match order {
        ScheduleOrder::Fixed => (0..3 * m).collect(),
        ScheduleOrder::Permuted => {
            permuted_coordinate_order(3 * m, &mut rng::stream(seed, "agent-schedule", 0))
        }
    }
}

/// Multiagent configuration from the scenario's resolution and offsets.
pub fn multiagent_config(scenario: &DroneScenario, order: CoordinateOrder) -> MultiagentConfig {
    MultiagentConfig::uniform(
        3 * scenario.num_drones(),
        scenario.multiagent.resolution,
        scenario.multiagent.offsets.clone(),
        order,
    )
}

/// Multiagent on-line PI with the residual generator, starting from the PD
/// base policy.
pub fn run_drone(
    problem: &DroneProblem,
    order: CoordinateOrder,
    iterations: usize,
    seed: u64,
) -> Result<IterationHistory<Vec<f64>, Vec<f64>>> {
    let s = problem.scenario();
    let pi0: SharedPolicy<DroneProblem> = Arc::new(heuristic_base_policy(s));
    let generator = ResidualGenerator {
        sampling: s.sampling.clone(),
        training: s.training.clone(),
    };
    let builder = MultiagentControlSet::new(multiagent_config(s, order))?;
    let options = OnlineOptions {
        max_iters: iterations,
        tie_tol: CONTINUOUS_TIE_TOL,
        slack: CONTINUOUS_TIE_TOL,
        seed,
        ..OnlineOptions::default()
    };
    run_online_pi(problem, &problem.initial_state(), pi0, &generator, &builder, &options)
}
