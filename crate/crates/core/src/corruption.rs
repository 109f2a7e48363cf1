//! Camera exposure corruption for evaluation sweeps.
//!
//! Exposure is modelled as a linear-light gain: values are decoded with a
//! 2.2 power law, scaled by `level / reference`, optionally perturbed by shot
//! noise, re-encoded and clamped.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::RgbImage;

pub const DISPLAY_GAMMA: f64 = 2.2;
pub const MIN_EXPOSURE: u32 = 10;
pub const MAX_EXPOSURE: u32 = 170;
/// Exposure of the fixed-exposure training data.
pub const TRAINING_EXPOSURE: u32 = 120;

const SWEEP: [u32; 10] = [10, 20, 40, 60, 80, 100, 120, 140, 160, 170];

/// Sensor exposure duration in milliseconds, within `[10, 170]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ExposureLevel(u32);

impl ExposureLevel {
    pub fn new(value: u32) -> Result<Self> {
        if (MIN_EXPOSURE..=MAX_EXPOSURE).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidParameter(format!(
                "exposure {value} outside [{MIN_EXPOSURE}, {MAX_EXPOSURE}]"
            )))
        }
    }

    pub fn training() -> Self {
        Self(TRAINING_EXPOSURE)
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for ExposureLevel {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ExposureLevel> for u32 {
    fn from(e: ExposureLevel) -> u32 {
        e.0
    }
}

impl std::fmt::Display for ExposureLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The ten evaluation exposures, ascending.
pub fn sweep_levels() -> Vec<ExposureLevel> {
    SWEEP.iter().map(|&v| ExposureLevel(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExposureConfig {
    pub reference: ExposureLevel,
    /// Shot-noise scale σ; noise std is `σ·sqrt(linear value)`.
    pub shot_noise_sigma: f64,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self {
            reference: ExposureLevel::training(),
            shot_noise_sigma: 0.0,
        }
    }
}

pub fn to_linear(v: f64) -> f64 {
    v.powf(DISPLAY_GAMMA)
}

pub fn to_display(v: f64) -> f64 {
    v.powf(1.0 / DISPLAY_GAMMA)
}

/// Noise-free exposure change from `reference` to `level`.
pub fn simulate_exposure(img: &RgbImage, level: ExposureLevel, reference: ExposureLevel) -> RgbImage {
    let gain = f64::from(level.0) / f64::from(reference.0);
    img.map_pixels(|px| px.map(|v| to_display((to_linear(f64::from(v)) * gain).min(1.0)) as f32))
}

/// Exposure change with Gaussian shot noise of std `sigma·sqrt(linear)` added
/// in linear light. `sigma == 0` draws nothing and equals [`simulate_exposure`].
pub fn simulate_exposure_noisy<R: Rng + ?Sized>(
    img: &RgbImage,
    level: ExposureLevel,
    reference: ExposureLevel,
    sigma: f64,
    rng: &mut R,
) -> Result<RgbImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("shot-noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(simulate_exposure(img, level, reference));
    }
    let gain = f64::from(level.0) / f64::from(reference.0);
    let mut data = Vec::with_capacity(img.data().len());
    for &v in img.data() {
        let lin = to_linear(f64::from(v)) * gain;
        let z: f64 = StandardNormal.sample(rng);
        let noisy = (lin + sigma * lin.sqrt() * z).clamp(0.0, 1.0);
        data.push(to_display(noisy) as f32);
    }
    RgbImage::from_clamped(img.width(), img.height(), data)
}
