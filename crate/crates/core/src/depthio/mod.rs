//! Relative depth maps: storage, alignment checks and depth backends.

mod oracle;
mod png16;
pub mod protocol;

pub use oracle::synthetic_depth_oracle;
pub use png16::{decode_depth_png16, encode_depth_png16, quantize_u16, read_depth_png16, write_depth_png16};
pub use protocol::run_external_backend;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::RgbImage;
use crate::par::{self, Parallelism};

/// Row-major relative depth in `[0, 1]`, aligned pixel-for-pixel with an RGB frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "expected {} depth values for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("depth value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn max_abs_diff(&self, other: &DepthMap) -> Result<f32> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "depth maps differ in size: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max))
    }
}

/// Ok iff both frames are non-empty and have identical dimensions.
pub fn verify_alignment(rgb: &RgbImage, depth: &DepthMap) -> Result<()> {
    if rgb.is_empty() || depth.data.is_empty() {
        return Err(Error::Alignment(format!(
            "degenerate frame: rgb {}x{}, depth {}x{}",
            rgb.width(),
            rgb.height(),
            depth.width,
            depth.height
        )));
    }
    if rgb.dims() != depth.dims() {
        return Err(Error::Alignment(format!(
            "rgb is {}x{} but depth is {}x{}",
            rgb.width(),
            rgb.height(),
            depth.width,
            depth.height
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    /// Depth PNGs laid out as `<directory>/<episode>/depth_<view>/frame_NNNNNN.png`.
    Precomputed { directory: PathBuf },
    /// A child process speaking the length-prefixed protocol in [`protocol`].
    ExternalProcess { command: Vec<String> },
    SyntheticOracle {
        #[serde(default = "default_blur_radius")]
        blur_radius: usize,
    },
}

fn default_blur_radius() -> usize {
    1
}

fn default_frame_timeout() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBackendSpec {
    #[serde(flatten)]
    pub kind: BackendKind,
    /// Free-form model tag, e.g. `"vit-b"` for offline preprocessing and
    /// `"vit-s"` for on-robot inference.
    #[serde(default)]
    pub model_variant: String,
    /// Per-frame response timeout for external backends, in seconds.
    #[serde(default = "default_frame_timeout")]
    pub frame_timeout_secs: f64,
}

impl Default for DepthBackendSpec {
    fn default() -> Self {
        Self::synthetic(default_blur_radius())
    }
}

impl DepthBackendSpec {
    pub fn synthetic(blur_radius: usize) -> Self {
        Self {
            kind: BackendKind::SyntheticOracle { blur_radius },
            model_variant: "synthetic".into(),
            frame_timeout_secs: default_frame_timeout(),
        }
    }

    pub fn external(command: Vec<String>, model_variant: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::ExternalProcess { command },
            model_variant: model_variant.into(),
            frame_timeout_secs: default_frame_timeout(),
        }
    }

    pub fn precomputed(directory: impl Into<PathBuf>) -> Self {
        Self {
            kind: BackendKind::Precomputed {
                directory: directory.into(),
            },
            model_variant: "precomputed".into(),
            frame_timeout_secs: default_frame_timeout(),
        }
    }
}

/// Estimates one depth map per frame with an in-memory backend
/// (synthetic oracle or external process), alignment-checking every result.
///
/// `Precomputed` backends are resolved per episode by the dataset layer.
pub fn estimate_depths(spec: &DepthBackendSpec, frames: &[RgbImage], mode: Parallelism) -> Result<Vec<DepthMap>> {
    let maps = match &spec.kind {
        BackendKind::SyntheticOracle { blur_radius } => {
            par::map_indexed(frames, mode, |_, img| synthetic_depth_oracle(img, *blur_radius))
        }
        BackendKind::ExternalProcess { .. } => run_external_backend(spec, frames)?,
        BackendKind::Precomputed { directory } => {
            return Err(Error::Backend(format!(
                "precomputed depth in {} must be loaded per episode",
                directory.display()
            )))
        }
    };
    for (i, (rgb, d)) in frames.iter().zip(&maps).enumerate() {
        verify_alignment(rgb, d).map_err(|e| Error::Alignment(format!("frame {i}: {e}")))?;
    }
    Ok(maps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_rules() {
        let rgb = RgbImage::filled(640, 480, [0.5; 3]);
        assert!(verify_alignment(&rgb, &DepthMap::zeros(640, 480)).is_ok());
        let err = verify_alignment(&rgb, &DepthMap::zeros(320, 240)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("640x480") && msg.contains("320x240"), "{msg}");
        let empty = RgbImage::filled(0, 0, [0.0; 3]);
        assert!(verify_alignment(&empty, &DepthMap::zeros(0, 0)).is_err());
    }

    #[test]
    fn depth_map_validation() {
        assert!(DepthMap::new(2, 2, vec![0.0; 3]).is_err());
        assert!(DepthMap::new(1, 1, vec![1.2]).is_err());
        assert!(DepthMap::new(1, 1, vec![1.0]).is_ok());
    }

    #[test]
    fn backend_spec_toml_shapes() {
        let s: DepthBackendSpec = toml::from_str("kind = \"synthetic_oracle\"\nblur_radius = 2\n").unwrap();
        assert_eq!(s.kind, BackendKind::SyntheticOracle { blur_radius: 2 });
        assert_eq!(s.frame_timeout_secs, 30.0);
        let s: DepthBackendSpec =
            toml::from_str("kind = \"external_process\"\ncommand = [\"depthd\", \"--gpu\"]\nmodel_variant = \"vit-s\"\n")
                .unwrap();
        assert_eq!(s.model_variant, "vit-s");
        assert!(matches!(s.kind, BackendKind::ExternalProcess { ref command } if command.len() == 2));
    }

    #[test]
    fn oracle_backend_produces_aligned_maps() {
        let frames: Vec<RgbImage> = (0..4)
            .map(|i| RgbImage::from_fn(5, 4, |x, y| [(x + i) as f32 / 9.0, y as f32 / 4.0, 0.2]))
            .collect();
        let maps = estimate_depths(&DepthBackendSpec::synthetic(1), &frames, Parallelism::Rayon).unwrap();
        assert_eq!(maps.len(), 4);
        assert!(maps.iter().all(|m| m.dims() == (5, 4)));
    }
}
