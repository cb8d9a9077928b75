use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{SamplingParams, TrainingConfig};
use crate::model::ControlBounds;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Obstacle {
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
}

impl Obstacle {
    /// Distance from `p` to the obstacle surface; zero or negative inside.
    pub fn distance(&self, p: &[f64]) -> f64 {
        match self {
            Obstacle::Box {
                center,
                half_extents,
            } => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for i in 0..3 {
                    let d = (p[i] - center[i]).abs() - half_extents[i];
                    outside += d.max(0.0).powi(2);
                    inside = inside.max(d);
                }
                if inside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
            Obstacle::Sphere { center, radius } => {
                let d2: f64 = (0..3).map(|i| (p[i] - center[i]).powi(2)).sum();
                d2.sqrt() - radius
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelBounds {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneSpec {
    pub initial_position: [f64; 3],
    #[serde(default)]
    pub initial_velocity: [f64; 3],
    pub goal: [f64; 3],
    /// Half extents of the goal region around `goal`.
    pub goal_half_extents: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub control: f64,
    pub repulsion_gain: f64,
    pub influence_radius: f64,
    /// Distances are clamped below at this value.
    pub distance_floor: f64,
    pub terminal_position: f64,
    pub terminal_velocity: f64,
    #[serde(default)]
    pub separation_gain: f64,
    #[serde(default)]
    pub separation_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        PdGains { kp: 0.6, kd: 1.4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiagentParams {
    pub resolution: f64,
    pub offsets: Vec<i32>,
}

impl Default for MultiagentParams {
    fn default() -> Self {
        MultiagentParams {
            resolution: 0.5,
            offsets: vec![-2, -1, 0, 1, 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneScenario {
    pub name: String,
    pub horizon: usize,
    pub dt: f64,
    pub accel_bounds: AccelBounds,
    pub obstacles: Vec<Obstacle>,
    pub drones: Vec<DroneSpec>,
    pub weights: CostWeights,
    #[serde(default)]
    pub base_policy: PdGains,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub multiagent: MultiagentParams,
}

fn finite3(path: String, v: &[f64; 3]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::schema(format!("{path}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::schema(path, "must be positive"))
    }
}

fn nonnegative(path: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::schema(path, "must be nonnegative"))
    }
}

impl DroneScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: DroneScenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn num_drones(&self) -> usize {
        self.drones.len()
    }

    pub fn control_bounds(&self) -> ControlBounds {
        let m = self.num_drones();
        let lower = (0..m).flat_map(|_| self.accel_bounds.lower).collect();
        let upper = (0..m).flat_map(|_| self.accel_bounds.upper).collect();
        ControlBounds::new(lower, upper)
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.drones
            .iter()
            .flat_map(|d| d.initial_position.into_iter().chain(d.initial_velocity))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::schema("horizon", "must be at least 1"));
        }
        positive("dt", self.dt)?;
        for i in 0..3 {
            let (lo, hi) = (self.accel_bounds.lower[i], self.accel_bounds.upper[i]);
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::schema(
                    format!("accel_bounds.lower[{i}]"),
                    "must be finite and below the upper bound",
                ));
            }
        }
        let w = &self.weights;
        nonnegative("weights.control", w.control)?;
        nonnegative("weights.repulsion_gain", w.repulsion_gain)?;
        positive("weights.influence_radius", w.influence_radius)?;
        positive("weights.distance_floor", w.distance_floor)?;
        nonnegative("weights.terminal_position", w.terminal_position)?;
        nonnegative("weights.terminal_velocity", w.terminal_velocity)?;
        nonnegative("weights.separation_gain", w.separation_gain)?;
        nonnegative("weights.separation_threshold", w.separation_threshold)?;
        if self.drones.is_empty() {
            return Err(Error::schema("drones", "at least one drone is required"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            match o {
                Obstacle::Box {
                    center,
                    half_extents,
                } => {
                    finite3(format!("obstacles[{i}].center"), center)?;
                    if half_extents.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
                        return Err(Error::schema(
                            format!("obstacles[{i}].half_extents"),
                            "must be positive",
                        ));
                    }
                }
                Obstacle::Sphere { center, radius } => {
                    finite3(format!("obstacles[{i}].center"), center)?;
                    positive(&format!("obstacles[{i}].radius"), *radius)?;
                }
            }
        }
        for (i, d) in self.drones.iter().enumerate() {
            finite3(format!("drones[{i}].initial_position"), &d.initial_position)?;
            finite3(format!("drones[{i}].initial_velocity"), &d.initial_velocity)?;
            finite3(format!("drones[{i}].goal"), &d.goal)?;
            if d.goal_half_extents.iter().any(|h| !(*h >= 0.0)) {
                return Err(Error::schema(
                    format!("drones[{i}].goal_half_extents"),
                    "must be nonnegative",
                ));
            }
            if let Some(j) = self
                .obstacles
                .iter()
                .position(|o| o.distance(&d.initial_position) <= 0.0)
            {
                return Err(Error::schema(
                    format!("drones[{i}].initial_position"),
                    format!("inside obstacle {j}"),
                ));
            }
        }
        if !self.multiagent.offsets.contains(&0) {
            return Err(Error::schema("multiagent.offsets", "must contain 0"));
        }
        positive("multiagent.resolution", self.multiagent.resolution)?;
        Ok(())
    }
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        /// Scenarios shipped with the crate, by name.
        pub const BUNDLED: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../scenarios/", $name, ".json"))),)*
        ];
    };
}

bundled!(
    "single-1",
    "single-2",
    "single-3",
    "multi-1",
    "multi-2",
    "multi-3",
);

/// Loads a bundled scenario by name.
pub fn bundled_scenario(name: &str) -> Result<DroneScenario> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::schema("scenario", format!("unknown bundled scenario `{name}`")))?;
    DroneScenario::from_json(text)
}
