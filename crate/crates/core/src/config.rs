//! TOML run configuration.
//!
//! Every field has a default, so an empty file reproduces the Duffing
//! benchmark. Command-line flags override values read from the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmark::{ControlGenerator, ExperimentConfig, GridSpec, PredictionSpec, TrueSystem, DEFAULT_SEED};
use crate::decomposition::DEFAULT_REL_TOL;
use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::model::ControlAffineField;
use crate::signal::SinusoidalInput;

/// A scalar shared by every channel or one value per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelScales {
    Shared(f64),
    PerChannel(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub mu_d: f64,
    pub mu_v: ChannelScales,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            mu_d: 11.0,
            mu_v: ChannelScales::Shared(10.0),
        }
    }
}

impl KernelSection {
    /// Kernel configuration for `m` control channels.
    pub fn build(&self, m: usize) -> Result<KernelConfig> {
        match &self.mu_v {
            ChannelScales::Shared(v) => KernelConfig::shared(self.mu_d, *v, m),
            ChannelScales::PerChannel(v) => {
                if v.len() != m + 1 {
                    return Err(Error::config(
                        "kernel.mu_v",
                        format!("has {} entries but m + 1 = {}", v.len(), m + 1),
                    ));
                }
                KernelConfig::new(self.mu_d, v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionSection {
    pub rel_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_modes: Option<usize>,
}

impl Default for DecompositionSection {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            max_modes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub system: TrueSystem,
    pub dt: f64,
    pub duration: f64,
    pub grid: GridSpec,
    pub controls: ControlGenerator,
}

impl Default for DataSection {
    fn default() -> Self {
        let d = ExperimentConfig::duffing();
        Self {
            system: d.system,
            dt: d.dt,
            duration: d.duration,
            grid: d.grid,
            controls: d.controls,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionSection {
    pub x0: Vec<f64>,
    /// Sinusoid spec, e.g. `"sin(1,1)+cos(1,2)"`.
    pub input: String,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for PredictionSection {
    fn default() -> Self {
        Self {
            x0: vec![2.0, -2.0],
            input: "sin(1,1)+cos(1,2)".into(),
            horizon: 10.0,
            dt: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub kernel: KernelSection,
    pub decomposition: DecompositionSection,
    pub data: DataSection,
    pub prediction: PredictionSection,
    pub evaluation: GridSpec,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            kernel: KernelSection::default(),
            decomposition: DecompositionSection::default(),
            data: DataSection::default(),
            prediction: PredictionSection::default(),
            evaluation: ExperimentConfig::duffing().evaluation,
            paths: PathsSection::default(),
        }
    }
}

impl RunConfig {
    /// Bundled settings for a benchmark system.
    pub fn preset(system: TrueSystem) -> Self {
        match system {
            TrueSystem::Duffing => Self::default(),
            TrueSystem::Linear => {
                let lin = ExperimentConfig::linear();
                Self {
                    data: DataSection {
                        system,
                        grid: lin.grid,
                        ..DataSection::default()
                    },
                    prediction: PredictionSection {
                        x0: lin.prediction.x0,
                        input: "sin(1,1)".into(),
                        horizon: lin.prediction.horizon,
                        dt: lin.prediction.dt,
                    },
                    evaluation: lin.evaluation,
                    ..Self::default()
                }
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            field: "<file>".into(),
            message: e.to_string().trim_end().replace('\n', " "),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml(&text)?;
        cfg.experiment()?;
        Ok(cfg)
    }

    /// `load(path)` when given, the defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration is always serializable")
    }

    /// Validated experiment description.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let m = self.data.system.control_dim();
        let input = SinusoidalInput::parse(&self.prediction.input)
            .map_err(|e| Error::config("prediction.input", e.to_string()))?;
        if !(self.decomposition.rel_tol.is_finite() && self.decomposition.rel_tol > 0.0) {
            return Err(Error::config("decomposition.rel_tol", "must be positive"));
        }
        let cfg = ExperimentConfig {
            system: self.data.system,
            grid: self.data.grid.clone(),
            dt: self.data.dt,
            duration: self.data.duration,
            controls: self.data.controls.clone(),
            seed: self.seed,
            kernel: self.kernel.build(m)?,
            rel_tol: self.decomposition.rel_tol,
            max_modes: self.decomposition.max_modes,
            prediction: PredictionSpec {
                x0: self.prediction.x0.clone(),
                input,
                horizon: self.prediction.horizon,
                dt: self.prediction.dt,
            },
            evaluation: self.evaluation.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_duffing_benchmark() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.experiment().unwrap(), ExperimentConfig::duffing());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn per_channel_scales() {
        let cfg = RunConfig::from_toml("[kernel]\nmu_d = 5.0\nmu_v = [1.0, 2.0]\n").unwrap();
        let k = cfg.experiment().unwrap().kernel;
        assert_eq!(k.mu_d(), 5.0);
        assert_eq!(k.mu_v(), &[1.0, 2.0]);
        let bad = RunConfig::from_toml("[kernel]\nmu_d = 5.0\nmu_v = [1.0, 2.0, 3.0]\n").unwrap();
        assert!(bad.experiment().unwrap_err().to_string().contains("kernel.mu_v"));
    }

    #[test]
    fn invalid_values_name_the_field() {
        let cases = [
            ("[kernel]\nmu_d = -1.0\nmu_v = 10.0\n", "kernel.mu_d"),
            ("[kernel]\nmu_d = 1.0\nmu_v = [1.0, 0.0]\n", "kernel.mu_v[1]"),
            ("[decomposition]\nrel_tol = 0.0\n", "decomposition.rel_tol"),
            ("[data]\ndt = -0.1\n", "data.dt"),
            ("[prediction]\ninput = \"tan(1,1)\"\n", "prediction.input"),
            ("[evaluation]\nlower = [0.0, 0.0]\nupper = [1.0, 1.0]\ncounts = [0, 3]\n", "evaluation.counts[0]"),
        ];
        for (text, field) in cases {
            let err = RunConfig::from_toml(text).unwrap().experiment().unwrap_err();
            assert!(err.to_string().contains(field), "{text}: {err}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sed = 1\n").is_err());
        assert!(RunConfig::from_toml("[kernel]\nmu = 1.0\n").is_err());
    }

    #[test]
    fn linear_system_config() {
        let text = "[data]\nsystem = \"linear\"\n[data.grid]\nlower = [-1.0]\nupper = [1.0]\ncounts = [25]\n\
                    [prediction]\nx0 = [0.5]\ninput = \"sin(1,1)\"\nhorizon = 5.0\n\
                    [evaluation]\nlower = [-1.0]\nupper = [1.0]\ncounts = [41]\n";
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.experiment().unwrap(), ExperimentConfig::linear());
        assert_eq!(cfg, RunConfig::preset(TrueSystem::Linear));
    }
}
