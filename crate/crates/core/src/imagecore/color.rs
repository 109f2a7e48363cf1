use serde::{Deserialize, Serialize};

use super::{clamp01, RgbImage};
use crate::error::{Error, Result};

/// Rec. 601 luma weights applied to stored (display-referred) values.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Fixed-point scale for order-independent luminance sums.
const LUMA_FIXED_SCALE: f64 = (1u64 << 24) as f64;

const EQUALIZE_BINS: usize = 256;

/// A single color-only transformation with its concrete parameter.
///
/// | kind | effect on each channel value `v` |
/// |---|---|
/// | `HueShift { turns }` | HSV hue `h' = (h + turns) mod 1` |
/// | `SaturationScale { factor }` | HSV saturation `s' = min(s·factor, 1)` |
/// | `BrightnessScale { factor }` | `v' = clamp(factor·v)` |
/// | `ContrastScale { factor }` | `v' = clamp((v − m)·factor + m)`, `m` = mean luminance |
/// | `Solarize { threshold }` | `v' = 1 − v` if `v ≥ threshold` else `v` |
/// | `Gamma { gamma }` | `v' = v^gamma` |
/// | `Posterize { bits }` | `v' = min(⌊v·2^bits⌋, 2^bits − 1) / (2^bits − 1)` |
/// | `Equalize` | per-channel 256-bin histogram equalization |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColorOp {
    HueShift { turns: f64 },
    SaturationScale { factor: f64 },
    BrightnessScale { factor: f64 },
    ContrastScale { factor: f64 },
    Solarize { threshold: f64 },
    Gamma { gamma: f64 },
    Posterize { bits: u8 },
    Equalize,
}

/// Parameterless tag for each [`ColorOp`] variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorOpKind {
    HueShift,
    SaturationScale,
    BrightnessScale,
    ContrastScale,
    Solarize,
    Gamma,
    Posterize,
    Equalize,
}

impl ColorOpKind {
    pub const ALL: [ColorOpKind; 8] = [
        ColorOpKind::HueShift,
        ColorOpKind::SaturationScale,
        ColorOpKind::BrightnessScale,
        ColorOpKind::ContrastScale,
        ColorOpKind::Solarize,
        ColorOpKind::Gamma,
        ColorOpKind::Posterize,
        ColorOpKind::Equalize,
    ];

    /// Builds the op of this kind with parameter `p` (`Posterize` rounds `p`
    /// to the nearest bit count; `Equalize` ignores it).
    pub fn with_param(self, p: f64) -> ColorOp {
        match self {
            ColorOpKind::HueShift => ColorOp::HueShift { turns: p },
            ColorOpKind::SaturationScale => ColorOp::SaturationScale { factor: p },
            ColorOpKind::BrightnessScale => ColorOp::BrightnessScale { factor: p },
            ColorOpKind::ContrastScale => ColorOp::ContrastScale { factor: p },
            ColorOpKind::Solarize => ColorOp::Solarize { threshold: p },
            ColorOpKind::Gamma => ColorOp::Gamma { gamma: p },
            ColorOpKind::Posterize => ColorOp::Posterize {
                bits: p.round().clamp(0.0, 255.0) as u8,
            },
            ColorOpKind::Equalize => ColorOp::Equalize,
        }
    }

    /// Parameter that makes the op an exact identity, where one exists.
    pub fn identity_param(self) -> Option<f64> {
        match self {
            ColorOpKind::HueShift => Some(0.0),
            ColorOpKind::SaturationScale
            | ColorOpKind::BrightnessScale
            | ColorOpKind::ContrastScale
            | ColorOpKind::Gamma => Some(1.0),
            ColorOpKind::Solarize | ColorOpKind::Posterize | ColorOpKind::Equalize => None,
        }
    }
}

impl ColorOp {
    pub fn kind(&self) -> ColorOpKind {
        match self {
            ColorOp::HueShift { .. } => ColorOpKind::HueShift,
            ColorOp::SaturationScale { .. } => ColorOpKind::SaturationScale,
            ColorOp::BrightnessScale { .. } => ColorOpKind::BrightnessScale,
            ColorOp::ContrastScale { .. } => ColorOpKind::ContrastScale,
            ColorOp::Solarize { .. } => ColorOpKind::Solarize,
            ColorOp::Gamma { .. } => ColorOpKind::Gamma,
            ColorOp::Posterize { .. } => ColorOpKind::Posterize,
            ColorOp::Equalize => ColorOpKind::Equalize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{what} in {self:?}")));
        match *self {
            ColorOp::HueShift { turns } if !(0.0..1.0).contains(&turns) => bad("hue shift outside [0, 1)"),
            ColorOp::SaturationScale { factor }
            | ColorOp::BrightnessScale { factor }
            | ColorOp::ContrastScale { factor }
                if !(factor >= 0.0 && factor.is_finite()) =>
            {
                bad("scale factor must be finite and >= 0")
            }
            ColorOp::Solarize { threshold } if !(0.0..=1.0).contains(&threshold) => {
                bad("solarize threshold outside [0, 1]")
            }
            ColorOp::Gamma { gamma } if !(gamma > 0.0 && gamma.is_finite()) => bad("gamma must be finite and > 0"),
            ColorOp::Posterize { bits } if !(1..=8).contains(&bits) => bad("posterize bits outside 1..=8"),
            _ => Ok(()),
        }
    }

    /// True for parameter values at which the op leaves every image unchanged.
    pub fn is_identity(&self) -> bool {
        match *self {
            ColorOp::HueShift { turns } => turns == 0.0,
            ColorOp::SaturationScale { factor }
            | ColorOp::BrightnessScale { factor }
            | ColorOp::ContrastScale { factor } => factor == 1.0,
            ColorOp::Gamma { gamma } => gamma == 1.0,
            ColorOp::Solarize { .. } | ColorOp::Posterize { .. } | ColorOp::Equalize => false,
        }
    }
}

pub(super) fn apply_unchecked(img: &RgbImage, op: &ColorOp) -> RgbImage {
    if op.is_identity() {
        return img.clone();
    }
    match *op {
        ColorOp::HueShift { turns } => img.map_pixels(|px| {
            let [h, s, v] = rgb_to_hsv(widen(px));
            narrow(hsv_to_rgb([wrap_unit(h + turns), s, v]))
        }),
        ColorOp::SaturationScale { factor } => img.map_pixels(|px| {
            let [h, s, v] = rgb_to_hsv(widen(px));
            narrow(hsv_to_rgb([h, (s * factor).min(1.0), v]))
        }),
        ColorOp::BrightnessScale { factor } => map_channels(img, |v| v * factor),
        ColorOp::ContrastScale { factor } => {
            let m = mean_luminance(img);
            map_channels(img, |v| (v - m) * factor + m)
        }
        ColorOp::Solarize { threshold } => map_channels(img, |v| if v >= threshold { 1.0 - v } else { v }),
        ColorOp::Gamma { gamma } => map_channels(img, |v| v.powf(gamma)),
        ColorOp::Posterize { bits } => {
            let levels = (1u32 << bits) as f64;
            map_channels(img, |v| ((v * levels) as u32 as f64).min(levels - 1.0) / (levels - 1.0))
        }
        ColorOp::Equalize => equalize(img),
    }
}

fn widen(px: [f32; 3]) -> [f64; 3] {
    px.map(f64::from)
}

fn narrow(px: [f64; 3]) -> [f32; 3] {
    px.map(|v| v as f32)
}

fn map_channels(img: &RgbImage, f: impl Fn(f64) -> f64) -> RgbImage {
    let data = img
        .data()
        .iter()
        .map(|&v| clamp01(f(f64::from(v)) as f32))
        .collect();
    RgbImage {
        width: img.width(),
        height: img.height(),
        data,
    }
}

pub fn luminance(px: [f32; 3]) -> f64 {
    LUMA_WEIGHTS[0] * f64::from(px[0]) + LUMA_WEIGHTS[1] * f64::from(px[1]) + LUMA_WEIGHTS[2] * f64::from(px[2])
}

/// Mean Rec. 601 luminance.
///
/// Per-pixel luminance is rounded to a 2^-24 grid and summed as integers, so
/// the result is bit-identical under any reordering of the pixels.
pub fn mean_luminance(img: &RgbImage) -> f64 {
    if img.is_empty() {
        return 0.0;
    }
    let total: u64 = img
        .pixels()
        .map(|px| (luminance([px[0], px[1], px[2]]) * LUMA_FIXED_SCALE).round() as u64)
        .sum();
    total as f64 / LUMA_FIXED_SCALE / img.pixel_count() as f64
}

/// Hexcone RGB → HSV with hue in turns `[0, 1)`.
///
/// ```text
/// v = max, c = max − min, s = c / v (0 when v = 0)
/// h = 0                          if c = 0
///     ((g − b)/c mod 6) / 6      if max = r
///     ((b − r)/c + 2) / 6        if max = g
///     ((r − g)/c + 4) / 6        otherwise
/// ```
pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    let s = if max > 0.0 { c / max } else { 0.0 };
    let h = if c == 0.0 {
        0.0
    } else if max == r {
        // (g − b)/c lies in [−1, 1], so mod 6 is at most one addition.
        let x = (g - b) / c;
        (if x < 0.0 { x + 6.0 } else { x }) / 6.0
    } else if max == g {
        ((b - r) / c + 2.0) / 6.0
    } else {
        ((r - g) / c + 4.0) / 6.0
    };
    [wrap_unit(h), s, max]
}

/// `x.rem_euclid(1.0)`, with the common in-range cases answered without a
/// floating-point remainder. Bit-identical to `rem_euclid` for every input.
#[inline]
fn wrap_unit(x: f64) -> f64 {
    if (0.0..1.0).contains(&x) {
        x
    } else if (1.0..2.0).contains(&x) {
        // Exact: x and 1 are within a factor of two.
        x - 1.0
    } else {
        x.rem_euclid(1.0)
    }
}

/// Hexcone HSV → RGB, inverse of [`rgb_to_hsv`].
///
/// ```text
/// i = ⌊6h⌋ mod 6, f = 6h − ⌊6h⌋
/// p = v(1 − s), q = v(1 − s·f), t = v(1 − s(1 − f))
/// i: 0 → (v,t,p) 1 → (q,v,p) 2 → (p,v,t) 3 → (p,q,v) 4 → (t,p,v) 5 → (v,p,q)
/// ```
pub fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let h6 = wrap_unit(h) * 6.0;
    // h6 is in [0, 6]; truncation is the floor.
    let fl = h6 as u32 as f64;
    let f = h6 - fl;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match fl as u32 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn equalize_bin(v: f32) -> usize {
    // v >= 0, so the truncating cast is the floor.
    ((f64::from(v) * EQUALIZE_BINS as f64) as usize).min(EQUALIZE_BINS - 1)
}

/// Each value maps through the lookup of its bin:
/// `(cdf[b] − cdf_min) / (n − cdf_min)`. A channel whose values all share one
/// bin is left unchanged.
fn equalize(img: &RgbImage) -> RgbImage {
    let n = img.pixel_count() as u64;
    let bins: Vec<u16> = img.data().iter().map(|&v| equalize_bin(v) as u16).collect();
    let mut luts: [Option<Vec<f32>>; 3] = [None, None, None];
    for (ch, lut) in luts.iter_mut().enumerate() {
        let mut hist = [0u64; EQUALIZE_BINS];
        for &b in bins.iter().skip(ch).step_by(3) {
            hist[usize::from(b)] += 1;
        }
        let cdf_min = hist.iter().copied().find(|&c| c > 0).unwrap_or(0);
        if n == cdf_min {
            continue;
        }
        let denom = (n - cdf_min) as f64;
        let mut acc = 0u64;
        *lut = Some(
            hist.iter()
                .map(|&c| {
                    acc += c;
                    (acc.saturating_sub(cdf_min) as f64 / denom) as f32
                })
                .collect(),
        );
    }
    let data = img
        .data()
        .iter()
        .zip(&bins)
        .enumerate()
        .map(|(i, (&v, &b))| match &luts[i % 3] {
            Some(lut) => lut[usize::from(b)],
            None => v,
        })
        .collect();
    RgbImage {
        width: img.width(),
        height: img.height(),
        data,
    }
}
