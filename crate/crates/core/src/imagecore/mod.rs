//! Color-only image operations on normalized RGB frames.
//!
//! Frames are stored as row-major `f32` RGB triples in `[0, 1]`. Every
//! operation in this module is spatially non-displacing: the value written at
//! a pixel depends only on the value read at that pixel plus image-global
//! statistics that are invariant under pixel permutation.

mod color;
mod io;

pub use color::{hsv_to_rgb, luminance, mean_luminance, rgb_to_hsv, ColorOp, ColorOpKind};
pub use io::{decode_png8, encode_png8, quantize_u8, read_png8, write_png8};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl RgbImage {
    /// Wraps raw RGB data, rejecting wrong lengths and out-of-range values.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "expected {} values for {width}x{height} RGB, got {}",
                width * height * 3,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "channel value {v} outside [0, 1]"
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image from out-of-range data by clamping each channel.
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self> {
        for v in &mut data {
            *v = clamp01(*v);
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let rgb = rgb.map(clamp01);
        let data = std::iter::repeat_n(rgb, width * height).flatten().collect();
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(x, y).map(clamp01));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb.map(clamp01));
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(3)
    }

    /// Applies `f` to every pixel, clamping the result.
    pub fn map_pixels(&self, f: impl Fn([f32; 3]) -> [f32; 3]) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for (out, px) in data.chunks_exact_mut(3).zip(self.data.chunks_exact(3)) {
            out.copy_from_slice(&f([px[0], px[1], px[2]]).map(clamp01));
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn mean_luminance(&self) -> f64 {
        mean_luminance(self)
    }

    pub fn flip_horizontal(&self) -> Self {
        self.remap(self.width, self.height, |x, y| (self.width - 1 - x, y))
    }

    pub fn flip_vertical(&self) -> Self {
        self.remap(self.width, self.height, |x, y| (x, self.height - 1 - y))
    }

    pub fn transpose(&self) -> Self {
        self.remap(self.height, self.width, |x, y| (y, x))
    }

    /// Output pixel `(x, y)` takes input pixel `src(x, y)`.
    fn remap(&self, width: usize, height: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = src(x, y);
                data.extend_from_slice(&self.pixel(sx, sy));
            }
        }
        Self { width, height, data }
    }

    /// Largest per-channel absolute difference.
    pub fn max_abs_diff(&self, other: &RgbImage) -> Result<f32> {
        ensure_same_dims(self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max))
    }
}

pub(crate) fn clamp01(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

pub(crate) fn ensure_same_dims(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Per-channel `t·a + (1 − t)·b`, clamped to `[0, 1]`.
pub fn blend(a: &RgbImage, b: &RgbImage, t: f64) -> Result<RgbImage> {
    ensure_same_dims(a, b)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("blend factor {t} outside [0, 1]")));
    }
    let t = t as f32;
    let u = 1.0 - t;
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| clamp01(t * x + u * y))
        .collect();
    Ok(RgbImage {
        width: a.width,
        height: a.height,
        data,
    })
}

/// Applies one color operation. See [`ColorOp`] for per-kind semantics.
pub fn apply_color_op(img: &RgbImage, op: &ColorOp) -> Result<RgbImage> {
    op.validate()?;
    Ok(color::apply_unchecked(img, op))
}
