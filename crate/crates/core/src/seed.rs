//! Per-frame seed derivation.
//!
//! Every random decision in the pipeline is drawn from a generator seeded by
//! [`frame_seed`], so a frame's output depends only on `(master_seed,
//! episode id, frame index)` and never on iteration order or thread count.
//!
//! The mix is published so other implementations can reproduce it:
//!
//! ```text
//! h    = fnv1a64(utf8(episode_id))
//! seed = mix64(master_seed ^ mix64(h + GOLDEN * (frame_index + 1)))
//! ```
//!
//! with wrapping 64-bit arithmetic, `GOLDEN = 0x9E3779B97F4A7C15` and `mix64`
//! the SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

/// Generator used throughout the crate.
pub type PipelineRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Identifies one frame for seeding purposes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrameKey {
    pub episode_id: String,
    pub frame_index: u64,
}

impl FrameKey {
    pub fn new(episode_id: impl Into<String>, frame_index: u64) -> Self {
        Self {
            episode_id: episode_id.into(),
            frame_index,
        }
    }
}

pub fn frame_seed(master_seed: u64, key: &FrameKey) -> u64 {
    let h = fnv1a64(key.episode_id.as_bytes());
    let salted = h.wrapping_add(GOLDEN.wrapping_mul(key.frame_index.wrapping_add(1)));
    mix64(master_seed ^ mix64(salted))
}

pub fn rng_from_seed(seed: u64) -> PipelineRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn frame_rng(master_seed: u64, key: &FrameKey) -> PipelineRng {
    rng_from_seed(frame_seed(master_seed, key))
}

/// Seed for the `index`-th item of a named stream (trials, scenes, splits).
pub fn stream_seed(master_seed: u64, stream: &str, index: u64) -> u64 {
    frame_seed(master_seed, &FrameKey::new(stream, index))
}
