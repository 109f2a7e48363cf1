//! AugBlender: a probabilistic gate between Dirichlet-weighted mixtures of
//! short augmentation chains (stays near the training distribution) and a
//! direct sequential chain of augmentations (pushes frames out of it),
//! followed by a λ-blend with the original frame.
//!
//! Sampling and execution are split: [`sample_plan`] draws every random
//! decision into an [`AugmentationPlan`], and [`execute_plan`] replays it
//! deterministically. [`augblend`] wires the two together with a generator
//! derived from the frame's identity.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{apply_color_op, ColorOp, ColorOpKind, RgbImage};
use crate::par::{self, Parallelism};
use crate::seed::{frame_rng, FrameKey};

/// How mixed chains are accumulated before the final blend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccumulationMode {
    /// `x_t` starts at the input and gains `Σ w_i·x_aug_i`; values up to 2
    /// are clamped after the final blend.
    #[default]
    Literal,
    /// `x_t` starts at zero, so the accumulation is a convex combination.
    Normalized,
}

/// Sampling range for one op kind. Parameters are drawn uniformly from
/// `[min, max)`; posterize draws an integer bit count from `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpRange {
    pub kind: ColorOpKind,
    #[serde(default)]
    pub min: f64,
    #[serde(default)]
    pub max: f64,
}

impl OpRange {
    pub fn new(kind: ColorOpKind, min: f64, max: f64) -> Self {
        Self { kind, min, max }
    }

    pub fn validate(&self) -> Result<()> {
        // Negated so that NaN bounds are rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.min <= self.max) {
            return Err(Error::Config(format!("op range {self:?}: min must not exceed max")));
        }
        match self.kind {
            ColorOpKind::Equalize => Ok(()),
            ColorOpKind::HueShift if self.min < 0.0 || self.max > 1.0 => Err(Error::Config(format!(
                "op range {self:?}: hue shift range must lie in [0, 1]"
            ))),
            ColorOpKind::HueShift => Ok(()),
            _ => {
                self.kind.with_param(self.min).validate()?;
                self.kind.with_param(self.max).validate()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ColorOp {
        match self.kind {
            ColorOpKind::Equalize => ColorOp::Equalize,
            ColorOpKind::Posterize => {
                let lo = self.min.round() as u8;
                let hi = self.max.round() as u8;
                ColorOp::Posterize {
                    bits: rng.random_range(lo..=hi),
                }
            }
            ColorOpKind::HueShift => {
                let u: f64 = rng.random();
                ColorOp::HueShift {
                    turns: (self.min + u * (self.max - self.min)).rem_euclid(1.0),
                }
            }
            kind => {
                let u: f64 = rng.random();
                kind.with_param(self.min + u * (self.max - self.min))
            }
        }
    }
}

/// Default sampling ranges for all eight op kinds.
pub fn default_op_pool() -> Vec<OpRange> {
    vec![
        OpRange::new(ColorOpKind::HueShift, 0.0, 1.0),
        OpRange::new(ColorOpKind::SaturationScale, 0.0, 2.0),
        OpRange::new(ColorOpKind::BrightnessScale, 0.2, 1.8),
        OpRange::new(ColorOpKind::ContrastScale, 0.2, 1.8),
        OpRange::new(ColorOpKind::Solarize, 0.5, 1.0),
        OpRange::new(ColorOpKind::Gamma, 0.3, 3.0),
        OpRange::new(ColorOpKind::Posterize, 2.0, 6.0),
        OpRange::new(ColorOpKind::Equalize, 0.0, 0.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugBlenderConfig {
    /// Chain count, and augmentations sampled per chain.
    pub k: usize,
    /// Dirichlet concentration.
    pub alpha: f64,
    /// Gate threshold: probability of taking the direct-chain branch.
    pub beta: f64,
    /// Final blend weight of the mixed image.
    pub lambda: f64,
    pub op_pool: Vec<OpRange>,
    pub accumulation_mode: AccumulationMode,
    pub master_seed: u64,
}

impl Default for AugBlenderConfig {
    fn default() -> Self {
        Self {
            k: 3,
            alpha: 1.0,
            beta: 0.16,
            lambda: 0.5,
            op_pool: default_op_pool(),
            accumulation_mode: AccumulationMode::Literal,
            master_seed: 0,
        }
    }
}

impl AugBlenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if self.op_pool.is_empty() {
            return Err(Error::Config("op_pool is empty".into()));
        }
        self.op_pool.iter().try_for_each(OpRange::validate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanMode {
    MixedChains,
    DirectChain,
}

/// One fully sampled realization of the algorithm for a single frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub xi: f64,
    pub mode: PlanMode,
    /// Mixing weights, one per chain (empty for `DirectChain`).
    pub weights: Vec<f64>,
    /// `MixedChains`: `k` chains of length `L ∈ 1..=k`.
    /// `DirectChain`: a single chain of `k` ops applied in order.
    pub chains: Vec<Vec<ColorOp>>,
    pub lambda_effective: f64,
}

/// Draws a Dirichlet(α·1ₖ) vector by normalizing `k` Gamma(α, 1) draws.
///
/// If every Gamma draw underflows to zero (possible for tiny α), the mass is
/// put on one uniformly chosen component.
pub fn dirichlet_sample<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("Dirichlet alpha must be > 0, got {alpha}")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("Dirichlet dimension must be >= 1".into()));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidParameter(format!("gamma({alpha}, 1): {e}")))?;
    let mut draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        for w in &mut draws {
            *w /= total;
        }
    } else {
        let hot = rng.random_range(0..k);
        for (i, w) in draws.iter_mut().enumerate() {
            *w = if i == hot { 1.0 } else { 0.0 };
        }
    }
    Ok(draws)
}

/// Samples a plan: draws `ξ ∈ [0, 1)` and delegates to [`sample_plan_with_xi`].
pub fn sample_plan<R: Rng + ?Sized>(config: &AugBlenderConfig, rng: &mut R) -> Result<AugmentationPlan> {
    let xi: f64 = rng.random();
    sample_plan_with_xi(config, xi, rng)
}

/// Samples a plan with the gate variable fixed to `xi`.
///
/// Draw order: Dirichlet weights, then per outer iteration `k` ops followed
/// by a chain length. Both branches consume the same stream so a plan's
/// shape depends only on `xi`.
pub fn sample_plan_with_xi<R: Rng + ?Sized>(config: &AugBlenderConfig, xi: f64, rng: &mut R) -> Result<AugmentationPlan> {
    config.validate()?;
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidParameter(format!("xi must lie in [0, 1], got {xi}")));
    }
    let k = config.k;
    let direct = xi < config.beta;
    let weights = dirichlet_sample(config.alpha, k, rng)?;
    let mut chains = Vec::with_capacity(k);
    let mut direct_ops = Vec::with_capacity(k);
    for i in 0..k {
        let ops: Vec<ColorOp> = (0..k)
            .map(|_| config.op_pool[rng.random_range(0..config.op_pool.len())].sample(rng))
            .collect();
        let len = rng.random_range(1..=k);
        if direct {
            direct_ops.push(ops[i]);
        } else {
            chains.push(ops[..len].to_vec());
        }
    }
    Ok(if direct {
        AugmentationPlan {
            xi,
            mode: PlanMode::DirectChain,
            weights: Vec::new(),
            chains: vec![direct_ops],
            lambda_effective: 1.0,
        }
    } else {
        AugmentationPlan {
            xi,
            mode: PlanMode::MixedChains,
            weights,
            chains,
            lambda_effective: config.lambda,
        }
    })
}

fn apply_chain(img: &RgbImage, chain: &[ColorOp]) -> Result<RgbImage> {
    let mut cur = img.clone();
    for op in chain {
        cur = apply_color_op(&cur, op)?;
    }
    Ok(cur)
}

/// Pre-blend accumulator `x_t` for a mixed plan (unclamped).
pub fn accumulate_mixed(img: &RgbImage, plan: &AugmentationPlan, mode: AccumulationMode) -> Result<Vec<f32>> {
    if plan.weights.len() != plan.chains.len() {
        return Err(Error::InvalidParameter(format!(
            "plan has {} weights for {} chains",
            plan.weights.len(),
            plan.chains.len()
        )));
    }
    let mut acc = match mode {
        AccumulationMode::Literal => img.data().to_vec(),
        AccumulationMode::Normalized => vec![0.0; img.data().len()],
    };
    for (chain, &w) in plan.chains.iter().zip(&plan.weights) {
        let aug = apply_chain(img, chain)?;
        let w = w as f32;
        for (a, &v) in acc.iter_mut().zip(aug.data()) {
            *a += w * v;
        }
    }
    Ok(acc)
}

/// Replays a plan on one frame.
pub fn execute_plan(img: &RgbImage, plan: &AugmentationPlan, mode: AccumulationMode) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&plan.lambda_effective) {
        return Err(Error::InvalidParameter(format!(
            "lambda_effective {} outside [0, 1]",
            plan.lambda_effective
        )));
    }
    match plan.mode {
        PlanMode::DirectChain => plan.chains.iter().try_fold(img.clone(), |cur, chain| apply_chain(&cur, chain)),
        PlanMode::MixedChains => {
            let acc = accumulate_mixed(img, plan, mode)?;
            let lambda = plan.lambda_effective as f32;
            let keep = 1.0 - lambda;
            let data = acc
                .iter()
                .zip(img.data())
                .map(|(&t, &x)| lambda * t + keep * x)
                .collect();
            RgbImage::from_clamped(img.width(), img.height(), data)
        }
    }
}

/// Samples and executes the plan for the frame identified by `key`.
pub fn augblend(img: &RgbImage, config: &AugBlenderConfig, key: &FrameKey) -> Result<RgbImage> {
    let mut rng = frame_rng(config.master_seed, key);
    let plan = sample_plan(config, &mut rng)?;
    execute_plan(img, &plan, config.accumulation_mode)
}

/// The plan [`augblend`] would use for `key`.
pub fn plan_for_frame(config: &AugBlenderConfig, key: &FrameKey) -> Result<AugmentationPlan> {
    sample_plan(config, &mut frame_rng(config.master_seed, key))
}

/// Augments a batch of frames; output order matches input order.
pub fn augblend_batch(
    frames: &[(RgbImage, FrameKey)],
    config: &AugBlenderConfig,
    mode: Parallelism,
) -> Result<Vec<RgbImage>> {
    config.validate()?;
    par::try_map_indexed(frames, mode, |_, (img, key)| augblend(img, config, key))
}
