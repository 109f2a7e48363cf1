use std::collections::HashSet;
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::io::episode_files;
use super::Episode;
use crate::corruption::TRAINING_EXPOSURE;
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, stream_seed};

/// Exposure range of the varied-exposure recordings.
pub const VARIED_EXPOSURE_RANGE: RangeInclusive<u32> = 50..=160;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetVariant {
    /// Every episode recorded at the training exposure.
    Fixed120,
    /// Every episode within [`VARIED_EXPOSURE_RANGE`].
    Varied,
    /// A seeded mixture of the two, see [`compose_mixed_split`].
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeSource {
    Fixed,
    Varied,
}

impl EpisodeSource {
    /// Whether `exposure` is admissible for episodes of this source.
    pub fn admits(self, exposure: u32) -> bool {
        match self {
            EpisodeSource::Fixed => exposure == TRAINING_EXPOSURE,
            EpisodeSource::Varied => VARIED_EXPOSURE_RANGE.contains(&exposure),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub exposure: u32,
    pub frames: usize,
    /// Lowercase hex SHA-256, see [`episode_checksum`].
    pub checksum: String,
    pub source: EpisodeSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub fixed: f64,
    pub varied: f64,
}

/// `manifest.json` at a dataset root.
///
/// ```json
/// {
///   "format_version": 1,
///   "variant": "Combined",
///   "split": { "fixed": 0.625, "varied": 0.375 },
///   "seed": 7,
///   "episodes": [
///     { "id": "ep_000", "exposure": 120, "frames": 40,
///       "checksum": "<sha256 hex>", "source": "fixed" }
///   ]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub variant: DatasetVariant,
    pub split: SplitRatios,
    #[serde(default)]
    pub seed: Option<u64>,
    pub episodes: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Manifest for a single-source dataset (`Fixed120` or `Varied`).
    pub fn single_source(variant: DatasetVariant, episodes: &[Episode]) -> Result<Self> {
        let (source, split) = match variant {
            DatasetVariant::Fixed120 => (EpisodeSource::Fixed, SplitRatios { fixed: 1.0, varied: 0.0 }),
            DatasetVariant::Varied => (EpisodeSource::Varied, SplitRatios { fixed: 0.0, varied: 1.0 }),
            DatasetVariant::Combined => {
                return Err(Error::Composition("combined manifests come from compose_mixed_split".into()))
            }
        };
        let entries = episodes
            .iter()
            .map(|e| entry_for(e, source))
            .collect::<Result<Vec<_>>>()?;
        let m = Self {
            format_version: MANIFEST_VERSION,
            variant,
            split,
            seed: None,
            episodes: entries,
        };
        m.check_variant()?;
        Ok(m)
    }

    /// Every variant constraint violation, as `(episode id, message)`.
    pub fn variant_violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for e in &self.episodes {
            let expected = match self.variant {
                DatasetVariant::Fixed120 => Some(EpisodeSource::Fixed),
                DatasetVariant::Varied => Some(EpisodeSource::Varied),
                DatasetVariant::Combined => None,
            };
            if let Some(src) = expected {
                if e.source != src {
                    out.push((e.id.clone(), format!("{:?} dataset contains a {:?} episode", self.variant, e.source)));
                }
            }
            if !e.source.admits(e.exposure) {
                out.push((
                    e.id.clone(),
                    format!("exposure {} not admissible for a {:?} episode in a {:?} dataset", e.exposure, e.source, self.variant),
                ));
            }
        }
        out
    }

    fn check_variant(&self) -> Result<()> {
        match self.variant_violations().into_iter().next() {
            None => Ok(()),
            Some((id, msg)) => Err(Error::Composition(format!("episode {id}: {msg}"))),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        json.push(b'\n');
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// SHA-256 over `(path, 0x00, u64 LE length, bytes)` for every data file in
/// path order.
pub(crate) fn checksum_of(files: &[(String, Vec<u8>)]) -> String {
    let mut h = Sha256::new();
    for (path, bytes) in files {
        h.update(path.as_bytes());
        h.update([0u8]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    hex::encode(h.finalize())
}

pub fn episode_checksum(ep: &Episode) -> Result<String> {
    Ok(checksum_of(&episode_files(ep)?))
}

fn entry_for(ep: &Episode, source: EpisodeSource) -> Result<ManifestEntry> {
    Ok(ManifestEntry {
        id: ep.id.clone(),
        exposure: ep.exposure.value(),
        frames: ep.len(),
        checksum: episode_checksum(ep)?,
        source,
    })
}

/// Seeded mixture of fixed- and varied-exposure episodes.
///
/// Takes `⌊fixed_fraction·target_count + ½⌋` fixed episodes and the rest
/// varied, each drawn without replacement. Selected episodes keep their input
/// order within each source; fixed entries come first.
pub fn compose_mixed_split(
    fixed: &[Episode],
    varied: &[Episode],
    fixed_fraction: f64,
    target_count: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    if !(0.0..=1.0).contains(&fixed_fraction) {
        return Err(Error::Composition(format!("fixed fraction {fixed_fraction} outside [0, 1]")));
    }
    let n_fixed = (fixed_fraction * target_count as f64 + 0.5).floor() as usize;
    let n_varied = target_count - n_fixed;
    let mut shortfalls = Vec::new();
    if fixed.len() < n_fixed {
        shortfalls.push(format!("need {n_fixed} fixed-exposure episodes, have {} (short by {})", fixed.len(), n_fixed - fixed.len()));
    }
    if varied.len() < n_varied {
        shortfalls.push(format!(
            "need {n_varied} varied-exposure episodes, have {} (short by {})",
            varied.len(),
            n_varied - varied.len()
        ));
    }
    if !shortfalls.is_empty() {
        return Err(Error::Composition(shortfalls.join("; ")));
    }
    let mut rng = rng_from_seed(stream_seed(seed, "compose_mixed_split", 0));
    let mut pick = |pool: &[Episode], n: usize, source: EpisodeSource| -> Result<Vec<ManifestEntry>> {
        let mut idx = index::sample(&mut rng, pool.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| entry_for(&pool[i], source)).collect()
    };
    let mut entries = pick(fixed, n_fixed, EpisodeSource::Fixed)?;
    entries.extend(pick(varied, n_varied, EpisodeSource::Varied)?);
    let mut seen = HashSet::new();
    if let Some(dup) = entries.iter().find(|e| !seen.insert(e.id.as_str())) {
        return Err(Error::Composition(format!("episode id {} selected twice", dup.id)));
    }
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        variant: DatasetVariant::Combined,
        split: SplitRatios {
            fixed: fixed_fraction,
            varied: 1.0 - fixed_fraction,
        },
        seed: Some(seed),
        episodes: entries,
    };
    manifest.check_variant()?;
    Ok(manifest)
}
