//! TOML pipeline configuration. Every section is optional and falls back to
//! its defaults; unknown keys are rejected.
//!
//! ```toml
//! [augblender]
//! k = 3
//! alpha = 1.0
//! beta = 0.16
//! lambda = 0.5
//! accumulation_mode = "literal"
//! master_seed = 0
//!
//! [exposure]
//! reference = 120
//! shot_noise_sigma = 0.0
//!
//! [backend]
//! kind = "synthetic_oracle"
//! blur_radius = 1
//!
//! [window]
//! steps = 2
//!
//! [compose]
//! fixed_fraction = 0.625
//! target_count = 16
//!
//! [sweep]
//! task = "PickBig"
//! trials_per_level = 20
//! tolerance_px = 5.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augblender::AugBlenderConfig;
use crate::corruption::ExposureConfig;
use crate::depthio::DepthBackendSpec;
use crate::error::{Error, Result};
use crate::evalharness::{SweepConfig, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComposeConfig {
    pub fixed_fraction: f64,
    /// Episodes in the combined dataset. No default: it must be chosen.
    pub target_count: Option<usize>,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        Self {
            fixed_fraction: 0.625,
            target_count: None,
        }
    }
}

/// Observation window length `N`. There is no default: it must be chosen.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub task: Task,
    /// Run every ablation pipeline; otherwise only the full one.
    pub ablation: bool,
    #[serde(flatten)]
    pub sweep: SweepConfig,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            task: Task::PickBig,
            ablation: true,
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineFileConfig {
    pub augblender: AugBlenderConfig,
    pub exposure: ExposureConfig,
    pub backend: DepthBackendSpec,
    pub window: WindowConfig,
    pub compose: ComposeConfig,
    pub sweep: SweepSection,
}

impl PipelineFileConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.augblender.validate()?;
        if !(self.exposure.shot_noise_sigma >= 0.0 && self.exposure.shot_noise_sigma.is_finite()) {
            return Err(Error::Config(format!("exposure.shot_noise_sigma {} invalid", self.exposure.shot_noise_sigma)));
        }
        if !(0.0..=1.0).contains(&self.compose.fixed_fraction) {
            return Err(Error::Config(format!("compose.fixed_fraction {} outside [0, 1]", self.compose.fixed_fraction)));
        }
        if self.window.steps == Some(0) {
            return Err(Error::Config("window.steps must be at least 1".into()));
        }
        self.sweep.sweep.validate()
    }

    /// Observation steps, or a config error naming the missing key.
    pub fn window_steps(&self) -> Result<usize> {
        self.window
            .steps
            .ok_or_else(|| Error::Config("window.steps (observation steps N) is required".into()))
    }

    /// Size of a composed dataset, or a config error naming the missing key.
    pub fn compose_target(&self) -> Result<usize> {
        self.compose
            .target_count
            .ok_or_else(|| Error::Config("compose.target_count (episodes in the combined dataset) is required".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthio::BackendKind;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineFileConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, PipelineFileConfig::default());
        assert_eq!(cfg.compose.fixed_fraction, 0.625);
        assert!(cfg.window_steps().is_err());
        assert!(cfg.compose_target().is_err());
    }

    #[test]
    fn sections_parse() {
        let cfg = PipelineFileConfig::from_toml_str(
            r#"
            [augblender]
            beta = 0.3
            master_seed = 7
            [backend]
            kind = "external_process"
            command = ["depthd", "--fast"]
            model_variant = "vit-s"
            frame_timeout_secs = 2.5
            [window]
            steps = 3
            [sweep]
            task = "PickSmall"
            trials_per_level = 5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.augblender.beta, 0.3);
        assert_eq!(cfg.augblender.k, 3);
        assert!(matches!(cfg.backend.kind, BackendKind::ExternalProcess { ref command } if command.len() == 2));
        assert_eq!(cfg.backend.frame_timeout_secs, 2.5);
        assert_eq!(cfg.window_steps().unwrap(), 3);
        assert_eq!(cfg.sweep.task, Task::PickSmall);
        assert_eq!(cfg.sweep.sweep.trials_per_level, 5);
    }

    #[test]
    fn bad_values_and_unknown_keys_rejected() {
        assert!(PipelineFileConfig::from_toml_str("[augblender]\nbeta = 1.5").is_err());
        assert!(PipelineFileConfig::from_toml_str("[augblender]\nbogus = 1").is_err());
        assert!(PipelineFileConfig::from_toml_str("[exposure]\nreference = 5").is_err());
        assert!(PipelineFileConfig::from_toml_str("[window]\nsteps = 0").is_err());
        assert!(PipelineFileConfig::from_toml_str("[sweep]\nbogus = 1").is_err());
        assert!(PipelineFileConfig::from_toml_str("[sweep]\ntrials_per_level = 0").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = PipelineFileConfig::default();
        cfg.window.steps = Some(2);
        cfg.compose.target_count = Some(16);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(PipelineFileConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
