//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use olpi_core::drone::{bundled_scenario, DroneScenario};
use olpi_core::exact::DEFAULT_BRUTE_FORCE_CAP;
use olpi_core::graph::GraphSpec;

use crate::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Mda,
    Drone,
    MultiDrone,
    CustomEnumerable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Standard,
    Simplified,
    Multiagent,
    MultiagentPermuted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorChoice {
    Tabular,
    Residual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub variant: Variant,
    pub generator: GeneratorChoice,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to 0 for discrete domains and 1e-9 for drones.
    #[serde(default)]
    pub tie_tol: Option<f64>,
    #[serde(default)]
    pub params: serde_json::Value,
    pub output_dir: PathBuf,
}

fn default_keep() -> f64 {
    0.5
}

fn default_cap() -> f64 {
    DEFAULT_BRUTE_FORCE_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdaParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub m: usize,
    /// Seed of the cost function; defaults to the experiment seed.
    #[serde(default)]
    pub instance_seed: Option<u64>,
    #[serde(default)]
    pub cost_table: Option<Vec<f64>>,
    /// Inclusion probability of non-incumbent controls (simplified variant).
    #[serde(default = "default_keep")]
    pub keep: f64,
    /// Brute-force oracle is skipped above this many assignments.
    #[serde(default = "default_cap")]
    pub brute_force_cap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    /// Bundled scenario name, or a path relative to the config file.
    Named(String),
    Inline(Box<DroneScenario>),
}

fn default_samples() -> usize {
    16
}

fn default_sigma_fraction() -> f64 {
    0.25
}

fn default_grid_cap() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneParams {
    pub scenario: ScenarioRef,
    /// Random candidates per stage (simplified variant).
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_sigma_fraction")]
    pub sigma_fraction: f64,
    /// Largest product grid the standard variant will search.
    #[serde(default = "default_grid_cap")]
    pub grid_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageAssignment {
    pub stage: usize,
    pub state: String,
    pub control: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphRef {
    File(String),
    Inline(Box<GraphSpec>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphParams {
    pub graph: GraphRef,
    /// Base policy entries; unlisted states take their first declared arc.
    #[serde(default)]
    pub base_policy: Vec<StageAssignment>,
    /// Entries that replace the generated policy's action, breaking
    /// consistency on purpose.
    #[serde(default)]
    pub overrides: Vec<StageAssignment>,
    #[serde(default = "default_keep")]
    pub keep: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainParams {
    Mda(MdaParams),
    Drone(DroneParams, DroneScenario),
    Graph(GraphParams, GraphSpec),
}

/// A parsed config together with the raw bytes it came from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub params: DomainParams,
    pub raw: Vec<u8>,
}

fn config_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

fn parse_params<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| config_err(format!("params: {e}")))
}

impl ExperimentConfig {
    pub fn tie_tol(&self) -> f64 {
        self.tie_tol.unwrap_or(match self.domain {
            Domain::Drone | Domain::MultiDrone => olpi_core::online::CONTINUOUS_TIE_TOL,
            _ => 0.0,
        })
    }

    fn check_combination(&self) -> Result<()> {
        use {Domain::*, GeneratorChoice::*, Variant::*};
        match (self.domain, self.generator) {
            (Mda | CustomEnumerable, Tabular) | (Drone | MultiDrone, Residual) => {}
            (d, g) => {
                return Err(config_err(format!(
                    "generator: {g:?} is not available for domain {d:?}"
                )))
            }
        }
        if matches!(self.domain, Mda | CustomEnumerable)
            && matches!(self.variant, Multiagent | MultiagentPermuted)
        {
            return Err(config_err(
                "variant: multiagent variants need real-vector controls",
            ));
        }
        match self.tie_tol {
            Some(t) if !(t >= 0.0) || !t.is_finite() => {
                Err(config_err("tie_tol: must be finite and nonnegative"))
            }
            _ => Ok(()),
        }
    }
}

/// Parses and validates a config. Relative paths inside `params` resolve
/// against `base_dir`.
pub fn parse_config(raw: &[u8], base_dir: &Path) -> Result<LoadedConfig> {
    let config: ExperimentConfig =
        serde_json::from_slice(raw).map_err(|e| config_err(format!("{e}")))?;
    config.check_combination()?;
    let params = match config.domain {
        Domain::Mda => {
            let p: MdaParams = parse_params(&config.params)?;
            if !(0.0..=1.0).contains(&p.keep) {
                return Err(config_err("params.keep: must lie in [0, 1]"));
            }
            DomainParams::Mda(p)
        }
        Domain::Drone | Domain::MultiDrone => {
            let p: DroneParams = parse_params(&config.params)?;
            let scenario = match &p.scenario {
                ScenarioRef::Inline(s) => {
                    s.validate()?;
                    (**s).clone()
                }
                ScenarioRef::Named(name) => match bundled_scenario(name) {
                    Ok(s) => s,
                    Err(_) => {
                        let path = base_dir.join(name);
                        let text = std::fs::read_to_string(&path)
                            .map_err(|e| config_err(format!("params.scenario: {}: {e}", path.display())))?;
                        DroneScenario::from_json(&text)?
                    }
                },
            };
            let drones = scenario.num_drones();
            if config.domain == Domain::Drone && drones != 1 {
                return Err(config_err(format!(
                    "params.scenario: domain drone needs one drone, scenario has {drones}"
                )));
            }
            if config.domain == Domain::MultiDrone && drones < 2 {
                return Err(config_err(
                    "params.scenario: domain multi-drone needs at least two drones",
                ));
            }
            if config.variant == Variant::Simplified && !(p.sigma_fraction > 0.0) {
                return Err(config_err("params.sigma_fraction: must be positive"));
            }
            DomainParams::Drone(p, scenario)
        }
        Domain::CustomEnumerable => {
            let p: GraphParams = parse_params(&config.params)?;
            let spec = match &p.graph {
                GraphRef::Inline(g) => (**g).clone(),
                GraphRef::File(name) => {
                    let path = base_dir.join(name);
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| config_err(format!("params.graph: {}: {e}", path.display())))?;
                    serde_json::from_str(&text)
                        .map_err(|e| config_err(format!("params.graph: {e}")))?
                }
            };
            if !(0.0..=1.0).contains(&p.keep) {
                return Err(config_err("params.keep: must lie in [0, 1]"));
            }
            DomainParams::Graph(p, spec)
        }
    };
    Ok(LoadedConfig {
        config,
        params,
        raw: raw.to_vec(),
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let raw = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&raw, path.parent().unwrap_or(Path::new(".")))
}

macro_rules! bundled_configs {
    ($($name:literal),* $(,)?) => {
        /// Configs shipped with the binary, by name.
        pub const BUNDLED_CONFIGS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../configs/", $name, ".json"))),)*
        ];
    };
}

bundled_configs!("mda_small", "mda_large", "drone_s1", "multi_drone_s3", "fig1");

pub fn bundled_config(name: &str) -> Result<LoadedConfig> {
    let (_, text) = BUNDLED_CONFIGS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| config_err(format!("unknown bundled config `{name}`")))?;
    parse_config(text.as_bytes(), Path::new("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_parse() {
        for (name, _) in BUNDLED_CONFIGS {
            bundled_config(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn invalid_combinations_are_rejected() {
        let bad = [
            r#"{"domain":"mda","variant":"standard","generator":"residual","iterations":1,"params":{"N":2,"m":2},"output_dir":"x"}"#,
            r#"{"domain":"drone","variant":"multiagent","generator":"tabular","iterations":1,"params":{"scenario":"single-1"},"output_dir":"x"}"#,
            r#"{"domain":"mda","variant":"multiagent","generator":"tabular","iterations":1,"params":{"N":2,"m":2},"output_dir":"x"}"#,
            r#"{"domain":"drone","variant":"multiagent","generator":"residual","iterations":1,"params":{"scenario":"multi-1"},"output_dir":"x"}"#,
            r#"{"domain":"mda","variant":"standard","generator":"tabular","iterations":1,"params":{"N":2,"m":2,"bogus":1},"output_dir":"x"}"#,
            r#"{"domain":"mda","variant":"standard","generator":"tabular","iterations":1,"tie_tol":-1,"params":{"N":2,"m":2},"output_dir":"x"}"#,
        ];
        for text in bad {
            let err = parse_config(text.as_bytes(), Path::new(".")).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn default_tie_tolerance_depends_on_domain() {
        assert_eq!(bundled_config("mda_small").unwrap().config.tie_tol(), 0.0);
        assert_eq!(bundled_config("drone_s1").unwrap().config.tie_tol(), 1e-9);
    }
}
