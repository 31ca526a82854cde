//! TOML experiment configuration.
//!
//! ```toml
//! seed = 2024
//!
//! [network]
//! anchors = "reference"        # "reference", "grid3x3" or [[x, y], ...]
//! num_targets = 30
//! range = 40.0
//!
//! [radio]
//! sigma = 4.0              # l0 = 40.0 and gamma = 3.0 by default
//!
//! [optimizer]              # every key optional
//! pop_size = 10
//! generations = 50
//!
//! [experiment]
//! runs = 100
//! algorithms = ["proposed", "proposed1", "ml-true"]
//!
//! [[sweep]]
//! axis = "num-targets"     # "num-targets", "sigma" or "range"
//! values = [20, 40]
//!
//! [timing]                 # optional runtime-scaling study
//! m_values = [20, 40, 80]
//! runs = 5
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::RefinerConfig;
use crate::error::Error;
use crate::eval::{Algorithm, Scenario, SweepAxis};
use crate::mpde::DeConfig;
use crate::network::{grid_anchors, reference_anchors, Aoi, Position};
use crate::rss_sim::PathLossParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorPreset {
    /// The nine-anchor list of the reference scenario, verbatim.
    Reference,
    /// Regular 3 x 3 grid over the area.
    Grid3x3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnchorSpec {
    Preset(AnchorPreset),
    Explicit(Vec<[f64; 2]>),
}

impl Default for AnchorSpec {
    fn default() -> Self {
        AnchorSpec::Preset(AnchorPreset::Reference)
    }
}

impl AnchorSpec {
    pub fn resolve(&self, aoi: &Aoi) -> Vec<Position> {
        match self {
            AnchorSpec::Preset(AnchorPreset::Reference) => reference_anchors(),
            AnchorSpec::Preset(AnchorPreset::Grid3x3) => grid_anchors(aoi, 3),
            AnchorSpec::Explicit(points) => points.iter().map(|&p| Position::from(p)).collect(),
        }
    }
}

fn default_aoi() -> Aoi {
    Aoi::square(100.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default)]
    pub anchors: AnchorSpec,
    pub num_targets: usize,
    pub range: f64,
    #[serde(default = "default_aoi")]
    pub aoi: Aoi,
}

fn default_l0() -> f64 {
    40.0
}

fn default_gamma() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioSection {
    #[serde(default = "default_l0")]
    pub l0: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub sigma: f64,
    #[serde(default)]
    pub shared_pair_noise: bool,
}

fn all_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub runs: usize,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub include_degenerate: bool,
    #[serde(default)]
    pub conventional_rmse: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    pub m_values: Vec<usize>,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub network: NetworkSection,
    pub radio: RadioSection,
    #[serde(default)]
    pub optimizer: DeConfig,
    #[serde(default)]
    pub baseline: RefinerConfig,
    pub experiment: ExperimentSection,
    #[serde(default, rename = "sweep", skip_serializing_if = "Vec::is_empty")]
    pub sweeps: Vec<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSection>,
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seed > i64::MAX as u64 {
            return Err(ConfigError::invalid("seed", "must fit in a signed 64-bit integer"));
        }
        if self.optimizer.seed > i64::MAX as u64 {
            return Err(ConfigError::invalid(
                "optimizer.seed",
                "must fit in a signed 64-bit integer",
            ));
        }
        if let AnchorSpec::Explicit(points) = &self.network.anchors {
            if points.is_empty() {
                return Err(ConfigError::invalid("network.anchors", "anchor list is empty"));
            }
        }
        for (i, sweep) in self.sweeps.iter().enumerate() {
            if sweep.values.is_empty() {
                return Err(ConfigError::invalid(format!("sweep[{i}].values"), "no values"));
            }
            for &v in &sweep.values {
                self.scenario()
                    .with_axis(sweep.axis, v)
                    .and_then(|s| s.validate())
                    .map_err(|e| scenario_error(e, Some(i)))?;
            }
        }
        if let Some(t) = &self.timing {
            if t.m_values.len() < 3 {
                return Err(ConfigError::invalid("timing.m_values", "need at least three values"));
            }
            if t.runs < 1 {
                return Err(ConfigError::invalid("timing.runs", "must be at least 1"));
            }
        }
        self.scenario().validate().map_err(|e| scenario_error(e, None))
    }

    /// The base scenario described by this config.
    pub fn scenario(&self) -> Scenario {
        let aoi = self.network.aoi;
        let mut radio = PathLossParams::new(self.radio.l0, self.radio.gamma, self.radio.sigma);
        radio.shared_pair_noise = self.radio.shared_pair_noise;
        Scenario {
            anchors: self.network.anchors.resolve(&aoi),
            aoi,
            num_targets: self.network.num_targets,
            range: self.network.range,
            radio,
            optimizer: self.optimizer.clone(),
            refiner: self.baseline.clone(),
            algorithms: self.experiment.algorithms.clone(),
            runs: self.experiment.runs,
            include_degenerate: self.experiment.include_degenerate,
            conventional_rmse: self.experiment.conventional_rmse,
        }
    }
}

/// Maps a scenario validation error onto the config key that caused it.
fn scenario_error(err: Error, sweep: Option<usize>) -> ConfigError {
    let key = match &err {
        Error::InvalidParameter { name, .. } => match *name {
            "range" | "num_targets" | "anchors" => format!("network.{name}"),
            "gamma" | "l0" | "sigma" => format!("radio.{name}"),
            "runs" | "algorithms" => format!("experiment.{name}"),
            "max_iters" | "tol" | "gradient_step" | "damping_init" => format!("baseline.{name}"),
            other => format!("optimizer.{other}"),
        },
        Error::InvalidAoi(_) | Error::OutsideAoi { .. } => "network.aoi".to_string(),
        _ => "config".to_string(),
    };
    let key = match sweep {
        Some(i) => format!("{key} (via sweep[{i}])"),
        None => key,
    };
    ConfigError::invalid(key, err.to_string())
}
