//! Episode datasets: in-memory types, on-disk layout, manifests, mixed-split
//! composition, validation and depth precomputation.
//!
//! On-disk layout under a dataset root:
//!
//! ```text
//! manifest.json
//! episodes/<id>/meta.json
//! episodes/<id>/lowdim.csv                 # header x,y,z,roll,pitch,yaw,gripper
//! episodes/<id>/{front,wrist}/frame_NNNNNN.png          # 8-bit RGB
//! episodes/<id>/{depth_front,depth_wrist}/frame_NNNNNN.png  # 16-bit gray
//! ```

mod depth;
mod io;
mod manifest;
mod validate;

pub use depth::{precompute_depth, precompute_depth_all};
pub use io::{
    episode_dir, episode_files, frame_file_name, ingest_episode, read_dataset, read_episode, read_lowdim_csv,
    write_dataset, write_episode, write_lowdim_csv, EpisodeMeta,
};
pub use manifest::{
    compose_mixed_split, episode_checksum, DatasetManifest, DatasetVariant, EpisodeSource, ManifestEntry,
    SplitRatios, VARIED_EXPOSURE_RANGE,
};
pub use validate::{validate_dataset, ValidationReport, Violation, ViolationKind};

use serde::{Deserialize, Serialize};

use crate::corruption::ExposureLevel;
use crate::depthio::{verify_alignment, DepthMap};
use crate::error::{Error, Result};
use crate::imagecore::RgbImage;

pub const RATE_HZ: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewName {
    Front,
    Wrist,
}

impl ViewName {
    pub const ALL: [ViewName; 2] = [ViewName::Front, ViewName::Wrist];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewName::Front => "front",
            ViewName::Wrist => "wrist",
        }
    }

    pub fn depth_dir(self) -> &'static str {
        match self {
            ViewName::Front => "depth_front",
            ViewName::Wrist => "depth_wrist",
        }
    }
}

impl std::fmt::Display for ViewName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One value per camera, in the fixed order (front, wrist).
#[derive(Debug, Clone, PartialEq)]
pub struct Views<T> {
    pub front: T,
    pub wrist: T,
}

impl<T> Views<T> {
    pub fn new(front: T, wrist: T) -> Self {
        Self { front, wrist }
    }

    pub fn get(&self, view: ViewName) -> &T {
        match view {
            ViewName::Front => &self.front,
            ViewName::Wrist => &self.wrist,
        }
    }

    pub fn get_mut(&mut self, view: ViewName) -> &mut T {
        match view {
            ViewName::Front => &mut self.front,
            ViewName::Wrist => &mut self.wrist,
        }
    }

    pub fn map<U>(self, mut f: impl FnMut(ViewName, T) -> U) -> Views<U> {
        Views {
            front: f(ViewName::Front, self.front),
            wrist: f(ViewName::Wrist, self.wrist),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ViewName, &T)> {
        [(ViewName::Front, &self.front), (ViewName::Wrist, &self.wrist)].into_iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gripper {
    Open,
    Closed,
}

impl Gripper {
    pub fn from_value(v: f64) -> Result<Self> {
        if v == 0.0 {
            Ok(Gripper::Open)
        } else if v == 1.0 {
            Ok(Gripper::Closed)
        } else {
            Err(Error::Validation(format!("gripper value {v} is not 0 or 1")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Gripper::Open => 0.0,
            Gripper::Closed => 1.0,
        }
    }
}

/// End-effector pose in the robot base frame plus gripper status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowDimState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub gripper: Gripper,
}

impl LowDimState {
    pub const DIM: usize = 7;

    /// Builds a state from `[x, y, z, roll, pitch, yaw, gripper]`.
    pub fn from_row(row: [f64; 7]) -> Result<Self> {
        if let Some(v) = row[..6].iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite low-dim value {v}")));
        }
        Ok(Self {
            x: row[0],
            y: row[1],
            z: row[2],
            roll: row[3],
            pitch: row[4],
            yaw: row[5],
            gripper: Gripper::from_value(row[6])?,
        })
    }

    pub fn to_row(&self) -> [f64; 7] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw, self.gripper.value()]
    }
}

/// Frame time as an exact index at [`RATE_HZ`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    pub index: u64,
}

impl Timestamp {
    /// `(numerator, denominator)` of the time in seconds.
    pub fn as_ratio(self) -> (u64, u64) {
        (self.index, u64::from(RATE_HZ))
    }

    pub fn seconds(self) -> f64 {
        self.index as f64 / f64::from(RATE_HZ)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub views: Views<RgbImage>,
    pub depths: Views<Option<DepthMap>>,
    pub state: LowDimState,
}

impl Frame {
    pub fn new(index: u64, views: Views<RgbImage>, state: LowDimState) -> Self {
        Self {
            index,
            views,
            depths: Views::new(None, None),
            state,
        }
    }

    pub fn timestamp(&self) -> Timestamp {
        Timestamp { index: self.index }
    }

    pub fn has_depth(&self) -> bool {
        self.depths.front.is_some() && self.depths.wrist.is_some()
    }

    /// Attaches a depth map to one view after checking alignment.
    pub fn set_depth(&mut self, view: ViewName, depth: DepthMap) -> Result<()> {
        verify_alignment(self.views.get(view), &depth)
            .map_err(|e| Error::Alignment(format!("frame {} view {view}: {e}", self.index)))?;
        *self.depths.get_mut(view) = Some(depth);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (view, depth) in self.depths.iter() {
            if let Some(d) = depth {
                verify_alignment(self.views.get(view), d)
                    .map_err(|e| Error::Alignment(format!("frame {} view {view}: {e}", self.index)))?;
            }
        }
        Ok(())
    }
}

/// One demonstration sampled at 30 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub id: String,
    pub frames: Vec<Frame>,
    pub exposure: ExposureLevel,
    pub rate_hz: u32,
}

impl Episode {
    pub fn new(id: impl Into<String>, frames: Vec<Frame>, exposure: ExposureLevel) -> Result<Self> {
        let ep = Self {
            id: id.into(),
            frames,
            exposure,
            rate_hz: RATE_HZ,
        };
        ep.validate()?;
        Ok(ep)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn has_depth(&self) -> bool {
        self.frames.iter().all(Frame::has_depth)
    }

    pub fn validate(&self) -> Result<()> {
        validate_episode_id(&self.id)?;
        if self.rate_hz != RATE_HZ {
            return Err(Error::Validation(format!(
                "episode {}: rate {} Hz, expected {RATE_HZ}",
                self.id, self.rate_hz
            )));
        }
        if self.frames.len() < 2 {
            return Err(Error::Validation(format!(
                "episode {}: {} frames, need at least 2",
                self.id,
                self.frames.len()
            )));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.index != i as u64 {
                return Err(Error::Validation(format!(
                    "episode {}: frame at position {i} has index {}",
                    self.id, f.index
                )));
            }
            f.validate()
                .map_err(|e| Error::Validation(format!("episode {}: {e}", self.id)))?;
        }
        Ok(())
    }
}

/// Episode ids become directory names: ASCII alphanumerics, `-`, `_`, `.`.
pub fn validate_episode_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!("invalid episode id {id:?}")))
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    pub fn state(i: u64) -> LowDimState {
        LowDimState::from_row([
            0.1 * i as f64,
            -0.25,
            0.5 + 1e-9 * i as f64,
            0.0,
            std::f64::consts::FRAC_PI_4,
            -1.0 / 3.0,
            (i % 2) as f64,
        ])
        .unwrap()
    }

    pub fn episode(id: &str, n: usize, exposure: u32) -> Episode {
        let frames = (0..n as u64)
            .map(|i| {
                let front = RgbImage::from_fn(8, 6, |x, y| [x as f32 / 8.0, y as f32 / 6.0, (i % 5) as f32 / 5.0]);
                let wrist = RgbImage::from_fn(8, 6, |x, y| [0.5, (x + y) as f32 / 14.0, (i % 3) as f32 / 3.0]);
                Frame::new(i, Views::new(front, wrist), state(i))
            })
            .collect();
        Episode::new(id, frames, ExposureLevel::new(exposure).unwrap()).unwrap()
    }
}
