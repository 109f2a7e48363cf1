//! Exposure-sweep evaluation at desk scale: synthetic pick scenes, a
//! nearest-neighbour replay policy, success rates and per-exposure tables.

mod policy;
mod report;
mod scene;

pub use policy::{nearest_index, nn_policy_predict, success_rate, ConstantPolicy, NnPolicy, PolicyAdapter, Prediction, Trial};
pub use report::{aggregate_and_render, round_half_up, published_table_fixture, PublishedRow, ReportFormat, SweepReport};
pub use scene::{generate_scene, generate_scene_with, ObjectSize, SceneConfig, SceneObject, SyntheticScene, Task};

use serde::{Deserialize, Serialize};

use crate::augblender::{augblend, AugBlenderConfig};
use crate::corruption::{simulate_exposure, sweep_levels, ExposureLevel};
use crate::dataset::{Frame, LowDimState, ViewName, Views};
use crate::depthio::{synthetic_depth_oracle, DepthMap};
use crate::error::{Error, Result};
use crate::imagecore::{quantize_u8, RgbImage};
use crate::obswindow::{pack_fused_observation, FusedObservation, ObservationWindow};
use crate::par::{self, Parallelism};
use crate::seed::{stream_seed, FrameKey};

/// Which components a pipeline uses: the depth channel at observation time
/// and AugBlender views in the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub method: String,
    pub depth: bool,
    #[serde(default)]
    pub augment: Option<AugBlenderConfig>,
}

impl PipelineConfig {
    pub fn rgb_only() -> Self {
        Self {
            method: "RGB-only".into(),
            depth: false,
            augment: None,
        }
    }

    pub fn with_depth() -> Self {
        Self {
            method: "RGB+Depth".into(),
            depth: true,
            augment: None,
        }
    }

    pub fn with_augblender(cfg: AugBlenderConfig) -> Self {
        Self {
            method: "RGB+AugBlender".into(),
            depth: false,
            augment: Some(cfg),
        }
    }

    pub fn full(cfg: AugBlenderConfig) -> Self {
        Self {
            method: "AugBlender+Depth".into(),
            depth: true,
            augment: Some(cfg),
        }
    }

    /// The four ablation pipelines, baseline first and full last.
    pub fn ablation(cfg: &AugBlenderConfig) -> Vec<Self> {
        vec![
            Self::rgb_only(),
            Self::with_depth(),
            Self::with_augblender(cfg.clone()),
            Self::full(cfg.clone()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub trials_per_level: usize,
    /// Success radius in pixels.
    pub tolerance_px: f64,
    pub seed: u64,
    /// Scenes recorded at the training exposure for the replay policy.
    pub training_scenes: usize,
    /// AugBlender copies added per training scene when augmentation is on.
    pub augmented_copies: usize,
    pub depth_blur_radius: usize,
    /// Exposure of the training recordings.
    pub reference: u32,
    pub scene: SceneConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            trials_per_level: 20,
            tolerance_px: 5.0,
            seed: 0,
            training_scenes: 400,
            augmented_copies: 3,
            depth_blur_radius: 1,
            reference: crate::corruption::TRAINING_EXPOSURE,
            scene: SceneConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_level == 0 {
            return Err(Error::Config("sweep: trials_per_level must be at least 1".into()));
        }
        if !(self.tolerance_px >= 0.0 && self.tolerance_px.is_finite()) {
            return Err(Error::Config(format!("sweep: tolerance_px {} invalid", self.tolerance_px)));
        }
        if self.training_scenes == 0 {
            return Err(Error::Config("sweep: training_scenes must be at least 1".into()));
        }
        ExposureLevel::new(self.reference)?;
        self.scene.validate()
    }
}

/// Simulates the 8-bit camera: every channel snapped to the nearest code.
pub fn quantize_8bit(img: &RgbImage) -> RgbImage {
    img.map_pixels(|p| p.map(|c| f32::from(quantize_u8(c)) / 255.0))
}

/// Packs one synchronized view pair as a single-step fused observation.
/// Without depth the depth planes are zero, so every pipeline shares one
/// layout and one distance.
pub fn scene_observation(views: Views<RgbImage>, depth: Option<Views<DepthMap>>) -> Result<FusedObservation> {
    let depth = depth.unwrap_or_else(|| {
        Views::new(
            DepthMap::zeros(views.front.width(), views.front.height()),
            DepthMap::zeros(views.wrist.width(), views.wrist.height()),
        )
    });
    let state = LowDimState::from_row([0.0; 7])?;
    let mut frame = Frame::new(0, views, state);
    for view in ViewName::ALL {
        frame.set_depth(view, depth.get(view).clone())?;
    }
    pack_fused_observation(&ObservationWindow {
        episode_id: "scene".into(),
        source_indices: vec![0],
        frames: vec![frame],
    })
}

fn oracle_views(views: &Views<RgbImage>, radius: usize) -> Views<DepthMap> {
    Views::new(synthetic_depth_oracle(&views.front, radius), synthetic_depth_oracle(&views.wrist, radius))
}

fn truth_of(scene: &SyntheticScene) -> Prediction {
    Prediction {
        position: scene.truth,
        gripper: scene.gripper,
    }
}

/// Replay data for the NN policy: scenes at the reference exposure without
/// jitter, plus AugBlender copies when the pipeline augments. Augmented
/// copies keep the depth of the unaugmented frame.
pub fn build_training_set(
    task: Task,
    pipeline: &PipelineConfig,
    cfg: &SweepConfig,
    mode: Parallelism,
) -> Result<Vec<(FusedObservation, Prediction)>> {
    cfg.validate()?;
    let scene_cfg = SceneConfig {
        jitter: 0,
        ..cfg.scene.clone()
    };
    let per_scene = par::map_range(cfg.training_scenes, mode, |i| -> Result<Vec<(FusedObservation, Prediction)>> {
        let (scene, views) = generate_scene_with(task, stream_seed(cfg.seed, "train-scene", i as u64), &scene_cfg)?;
        let views = views.map(|_, v| quantize_8bit(&v));
        let truth = truth_of(&scene);
        let depth = pipeline.depth.then(|| oracle_views(&views, cfg.depth_blur_radius));
        let mut out = vec![(scene_observation(views.clone(), depth.clone())?, truth)];
        if let Some(aug) = &pipeline.augment {
            for copy in 0..cfg.augmented_copies {
                let key = FrameKey::new(format!("train-{i:06}"), copy as u64);
                let front = augblend(&views.front, aug, &key)?;
                let wrist = augblend(&views.wrist, aug, &key)?;
                out.push((scene_observation(Views::new(front, wrist), depth.clone())?, truth));
            }
        }
        Ok(out)
    });
    let mut train = Vec::new();
    for chunk in per_scene {
        train.extend(chunk?);
    }
    Ok(train)
}

/// Evaluates `policy` at every sweep level.
///
/// Trial `t` renders the same jittered scene at every level, so per-level
/// differences come from exposure alone. The observation passes through the
/// camera model (exposure, 8-bit quantization) and, with depth on, the
/// depth oracle runs on the corrupted frame.
pub fn run_sweep(
    policy: &dyn PolicyAdapter,
    task: Task,
    pipeline: &PipelineConfig,
    cfg: &SweepConfig,
    mode: Parallelism,
) -> Result<SweepReport> {
    cfg.validate()?;
    let levels = sweep_levels();
    let reference = ExposureLevel::new(cfg.reference)?;
    let n = cfg.trials_per_level;
    let outcomes = par::map_range(levels.len() * n, mode, |job| -> Result<Trial> {
        let (li, t) = (job / n, job % n);
        let (scene, views) = generate_scene_with(task, stream_seed(cfg.seed, "trial-scene", t as u64), &cfg.scene)?;
        let views = views.map(|_, v| quantize_8bit(&simulate_exposure(&v, levels[li], reference)));
        let depth = pipeline.depth.then(|| oracle_views(&views, cfg.depth_blur_radius));
        let obs = scene_observation(views, depth)?;
        Ok(Trial {
            prediction: policy.predict(&obs)?,
            truth: truth_of(&scene),
            tolerance: cfg.tolerance_px,
        })
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let rates = outcomes.chunks(n).map(success_rate).collect::<Result<Vec<_>>>()?;
    SweepReport::new(task.name(), &pipeline.method, rates)
}

/// Trains the NN replay policy for `pipeline` and sweeps it.
pub fn evaluate_pipeline(task: Task, pipeline: &PipelineConfig, cfg: &SweepConfig, mode: Parallelism) -> Result<SweepReport> {
    let policy = NnPolicy::new(build_training_set(task, pipeline, cfg, mode)?)?;
    run_sweep(&policy, task, pipeline, cfg, mode)
}
