//! Observation windows and the fused RGB+depth tensor layout.
//!
//! A [`FusedObservation`] holds, per view (front, wrist), an `N×4×H×W`
//! planar block with channels R, G, B, depth, plus an `N×7` low-dim block.
//!
//! Binary export, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "AGPF"
//! 4       4     u32 version = 1
//! 8       4     u32 N
//! 12      4     u32 views = 2
//! 16      4     u32 H
//! 20      4     u32 W
//! 24      ...   f32 front block (N·4·H·W), f32 wrist block, f32 lowdim (N·7)
//! ```

use std::io::{Read, Write};

use crate::augblender::{augblend, AugBlenderConfig};
use crate::dataset::{Episode, Frame, LowDimState, ViewName};
use crate::error::{Error, Result};
use crate::seed::FrameKey;

pub const CHANNELS: usize = 4;
pub const VIEWS: usize = 2;
pub const FUSED_MAGIC: [u8; 4] = *b"AGPF";
pub const FUSED_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

/// The last `N` frames up to a decision step.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWindow {
    pub episode_id: String,
    /// Episode frame index of each slot; leading repeats of 0 mark left-padding.
    pub source_indices: Vec<u64>,
    pub frames: Vec<Frame>,
}

impl ObservationWindow {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Collects frames `t−N+1 ..= t`, repeating frame 0 for indices before the
/// episode start. With `augment`, RGB of every slot is replaced by its
/// AugBlender output keyed on (episode id, frame index); depth and low-dim
/// state pass through untouched. Both views of a frame share one plan.
pub fn assemble_window(
    ep: &Episode,
    t_index: usize,
    n: usize,
    augment: Option<&AugBlenderConfig>,
) -> Result<ObservationWindow> {
    if n == 0 {
        return Err(Error::InvalidParameter("observation steps N must be at least 1".into()));
    }
    if t_index >= ep.len() {
        return Err(Error::InvalidParameter(format!(
            "t_index {t_index} out of range for episode {} with {} frames",
            ep.id,
            ep.len()
        )));
    }
    let source_indices: Vec<u64> = (0..n)
        .map(|slot| (t_index + slot + 1).saturating_sub(n) as u64)
        .collect();
    let mut frames = Vec::with_capacity(n);
    for &idx in &source_indices {
        let src = &ep.frames[idx as usize];
        if !src.has_depth() {
            return Err(Error::Precondition(format!(
                "episode {} frame {idx} has no depth; run depth precomputation first",
                ep.id
            )));
        }
        let mut frame = src.clone();
        if let Some(cfg) = augment {
            let key = FrameKey::new(ep.id.clone(), idx);
            for view in ViewName::ALL {
                *frame.views.get_mut(view) = augblend(src.views.get(view), cfg, &key)?;
            }
        }
        frames.push(frame);
    }
    Ok(ObservationWindow {
        episode_id: ep.id.clone(),
        source_indices,
        frames,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedObservation {
    n: usize,
    height: usize,
    width: usize,
    front: Vec<f32>,
    wrist: Vec<f32>,
    lowdim: Vec<f32>,
}

impl FusedObservation {
    /// Assembles from raw blocks, checking every length.
    pub fn from_blocks(
        n: usize,
        height: usize,
        width: usize,
        front: Vec<f32>,
        wrist: Vec<f32>,
        lowdim: Vec<f32>,
    ) -> Result<Self> {
        let block = n * CHANNELS * height * width;
        if n == 0 || height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty fused observation {n}x{CHANNELS}x{height}x{width}")));
        }
        for (name, len, want) in [
            ("front", front.len(), block),
            ("wrist", wrist.len(), block),
            ("lowdim", lowdim.len(), n * LowDimState::DIM),
        ] {
            if len != want {
                return Err(Error::Shape(format!("{name} block has {len} values, expected {want}")));
            }
        }
        Ok(Self {
            n,
            height,
            width,
            front,
            wrist,
            lowdim,
        })
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `N×4×H×W` block of one view.
    pub fn view(&self, view: ViewName) -> &[f32] {
        match view {
            ViewName::Front => &self.front,
            ViewName::Wrist => &self.wrist,
        }
    }

    pub fn lowdim(&self) -> &[f32] {
        &self.lowdim
    }

    /// `H×W` plane for `(view, step, channel)`.
    pub fn plane(&self, view: ViewName, step: usize, channel: usize) -> &[f32] {
        let hw = self.height * self.width;
        let start = (step * CHANNELS + channel) * hw;
        &self.view(view)[start..start + hw]
    }

    pub fn total_len(&self) -> usize {
        self.front.len() + self.wrist.len() + self.lowdim.len()
    }

    /// All values in export order: front, wrist, lowdim.
    pub fn values(&self) -> impl Iterator<Item = f32> + '_ {
        self.front.iter().chain(&self.wrist).chain(&self.lowdim).copied()
    }

    pub fn same_shape(&self, other: &FusedObservation) -> bool {
        (self.n, self.height, self.width) == (other.n, other.height, other.width)
    }

    /// Mean squared difference over every packed value.
    pub fn mean_squared_distance(&self, other: &FusedObservation) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!(
                "fused shapes differ: {}x{}x{} vs {}x{}x{}",
                self.n, self.height, self.width, other.n, other.height, other.width
            )));
        }
        let sum = squared_distance(&self.front, &other.front)
            + squared_distance(&self.wrist, &other.wrist)
            + squared_distance(&self.lowdim, &other.lowdim);
        Ok(sum / self.total_len() as f64)
    }

    pub fn export<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(&FUSED_MAGIC);
        for v in [FUSED_VERSION, self.n as u32, VIEWS as u32, self.height as u32, self.width as u32] {
            header.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.total_len() * 4);
        for v in self.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.total_len() * 4);
        self.export(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn import<R: Read>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|e| Error::Format(format!("fused header: {e}")))?;
        if header[..4] != FUSED_MAGIC {
            return Err(Error::Format(format!("bad fused magic {:?}", &header[..4])));
        }
        let field = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (version, n, views, h, w) = (field(0), field(1), field(2), field(3), field(4));
        if version != FUSED_VERSION as usize {
            return Err(Error::Format(format!("unsupported fused version {version}")));
        }
        if views != VIEWS {
            return Err(Error::Format(format!("fused export has {views} views, expected {VIEWS}")));
        }
        let block = n
            .checked_mul(CHANNELS * h)
            .and_then(|v| v.checked_mul(w))
            .ok_or_else(|| Error::Format("fused dimensions overflow".into()))?;
        let mut read_block = |len: usize| -> Result<Vec<f32>> {
            let mut bytes = vec![0u8; len * 4];
            r.read_exact(&mut bytes)
                .map_err(|e| Error::Format(format!("fused payload: {e}")))?;
            Ok(bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let front = read_block(block)?;
        let wrist = read_block(block)?;
        let lowdim = read_block(n * LowDimState::DIM)?;
        Self::from_blocks(n, h, w, front, wrist, lowdim)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let obs = Self::import(&mut r)?;
        if !r.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after fused payload", r.len())));
        }
        Ok(obs)
    }
}

/// Sum of squared differences. Short f32 runs are accumulated into an f64
/// total so the result is stable and vectorizes well.
fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    const LANES: usize = 8;
    const RUN: usize = 256;
    let mut total = 0.0f64;
    for (ca, cb) in a.chunks(RUN).zip(b.chunks(RUN)) {
        let mut acc = [0.0f32; LANES];
        let mut ia = ca.chunks_exact(LANES);
        let mut ib = cb.chunks_exact(LANES);
        for (xa, xb) in (&mut ia).zip(&mut ib) {
            for l in 0..LANES {
                let d = xa[l] - xb[l];
                acc[l] += d * d;
            }
        }
        let mut run: f64 = acc.iter().map(|&v| f64::from(v)).sum();
        for (x, y) in ia.remainder().iter().zip(ib.remainder()) {
            let d = f64::from(*x) - f64::from(*y);
            run += d * d;
        }
        total += run;
    }
    total
}

/// Packs a window into the fused layout. Values are copied unchanged.
pub fn pack_fused_observation(window: &ObservationWindow) -> Result<FusedObservation> {
    let first = window
        .frames
        .first()
        .ok_or_else(|| Error::Shape("empty observation window".into()))?;
    let (width, height) = first.views.front.dims();
    let hw = width * height;
    let n = window.frames.len();
    let mut blocks = [Vec::with_capacity(n * CHANNELS * hw), Vec::with_capacity(n * CHANNELS * hw)];
    let mut lowdim = Vec::with_capacity(n * LowDimState::DIM);
    for (slot, frame) in window.frames.iter().enumerate() {
        for (vi, view) in ViewName::ALL.into_iter().enumerate() {
            let rgb = frame.views.get(view);
            let depth = frame.depths.get(view).as_ref().ok_or_else(|| {
                Error::Shape(format!("window slot {slot} (frame {}): {view} view has no depth", frame.index))
            })?;
            if rgb.dims() != (width, height) || depth.dims() != (width, height) {
                return Err(Error::Shape(format!(
                    "window slot {slot} (frame {}): {view} rgb {}x{} / depth {}x{} do not match {width}x{height}",
                    frame.index,
                    rgb.width(),
                    rgb.height(),
                    depth.width(),
                    depth.height()
                )));
            }
            let out = &mut blocks[vi];
            for c in 0..3 {
                out.extend(rgb.data().iter().skip(c).step_by(3));
            }
            out.extend_from_slice(depth.data());
        }
        lowdim.extend(frame.state.to_row().iter().map(|&v| v as f32));
    }
    let [front, wrist] = blocks;
    FusedObservation::from_blocks(n, height, width, front, wrist, lowdim)
}
