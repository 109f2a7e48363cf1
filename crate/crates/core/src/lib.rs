//! Deterministic perception data pipeline for robust visuomotor imitation
//! learning: color augmentation blending, camera exposure corruption, RGB +
//! relative depth episode datasets, fused observation windows and an
//! exposure-sweep evaluation harness.

pub mod augblender;
pub mod config;
pub mod corruption;
pub mod dataset;
pub mod depthio;
pub mod error;
pub mod evalharness;
pub mod imagecore;
pub mod obswindow;
pub mod par;
pub mod seed;

pub use error::{Error, Result};
