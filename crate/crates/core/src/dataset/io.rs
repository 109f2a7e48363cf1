use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{checksum_of, DatasetManifest};
use super::{validate_episode_id, Episode, Frame, LowDimState, ViewName, Views, RATE_HZ};
use crate::corruption::ExposureLevel;
use crate::depthio::{encode_depth_png16, read_depth_png16, DepthMap};
use crate::error::{Error, Result};
use crate::imagecore::{encode_png8, read_png8, RgbImage};
use crate::par::{self, Parallelism};

pub const LOWDIM_HEADER: [&str; 7] = ["x", "y", "z", "roll", "pitch", "yaw", "gripper"];
pub const LOWDIM_FILE: &str = "lowdim.csv";
pub const META_FILE: &str = "meta.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Per-episode metadata stored next to the frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeMeta {
    pub id: String,
    /// Exposure recorded at capture. Kept raw so validation can report bad values.
    pub exposure: u32,
    pub rate_hz: u32,
    pub frames: usize,
}

pub fn frame_file_name(index: u64) -> String {
    format!("frame_{index:06}.png")
}

pub fn episode_dir(root: &Path, id: &str) -> PathBuf {
    root.join("episodes").join(id)
}

/// Sorted `*.png` files in a directory.
pub(crate) fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn write_lowdim_csv(states: &[LowDimState]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format(format!("lowdim csv: {e}"));
    w.write_record(LOWDIM_HEADER).map_err(csv_err)?;
    for s in states {
        let row = s.to_row();
        let mut fields: Vec<String> = row[..6].iter().map(|v| v.to_string()).collect();
        fields.push(format!("{}", row[6] as u8));
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format(format!("lowdim csv: {e}")))
}

/// Parses `lowdim.csv` content; `origin` names the source in errors.
pub fn read_lowdim_csv(bytes: &[u8], origin: &str) -> Result<Vec<LowDimState>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = r
        .headers()
        .map_err(|e| Error::Format(format!("{origin}: {e}")))?
        .clone();
    if header.iter().map(str::trim).ne(LOWDIM_HEADER) {
        return Err(Error::Format(format!(
            "{origin}: header must be {}, found {}",
            LOWDIM_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut states = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("{origin}: row {}: {e}", i + 1)))?;
        let mut row = [0.0; 7];
        for (slot, field) in row.iter_mut().zip(rec.iter()) {
            *slot = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("{origin}: row {}: bad number {field:?}", i + 1)))?;
        }
        let state = LowDimState::from_row(row).map_err(|e| Error::Validation(format!("{origin}: row {}: {e}", i + 1)))?;
        states.push(state);
    }
    Ok(states)
}

/// Builds an episode from pre-extracted per-view image sequences and a
/// low-dim CSV. Frames are ordered by file name; timestamps are `i/30` s.
pub fn ingest_episode(
    front_dir: &Path,
    wrist_dir: &Path,
    lowdim_file: &Path,
    exposure: ExposureLevel,
    id: &str,
) -> Result<Episode> {
    validate_episode_id(id)?;
    let front = list_pngs(front_dir)?;
    let wrist = list_pngs(wrist_dir)?;
    let lowdim_bytes = fs::read(lowdim_file).map_err(|e| Error::io(lowdim_file, e))?;
    let states = read_lowdim_csv(&lowdim_bytes, &lowdim_file.display().to_string())?;
    let counts = [
        (format!("front ({})", front_dir.display()), front.len()),
        (format!("wrist ({})", wrist_dir.display()), wrist.len()),
        (format!("low-dim ({})", lowdim_file.display()), states.len()),
    ];
    if let Some((name, n)) = counts.iter().find(|(_, n)| *n != counts[0].1) {
        return Err(Error::Ingestion(format!(
            "episode {id}: stream {name} has {n} samples but {} has {}",
            counts[0].0, counts[0].1
        )));
    }
    let load = |paths: &[PathBuf]| par::try_map_indexed(paths, Parallelism::Rayon, |_, p| read_png8(p));
    let front = load(&front)?;
    let wrist = load(&wrist)?;
    let frames = front
        .into_iter()
        .zip(wrist)
        .zip(states)
        .enumerate()
        .map(|(i, ((f, w), s))| Frame::new(i as u64, Views::new(f, w), s))
        .collect();
    Episode::new(id, frames, exposure)
}

/// Every data file of an episode as `(relative path, bytes)`, sorted by path.
/// `meta.json` is not included.
pub fn episode_files(ep: &Episode) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for view in ViewName::ALL {
        let rgb = par::try_map_indexed(&ep.frames, Parallelism::Rayon, |_, f| encode_png8(f.views.get(view)))?;
        for (f, bytes) in ep.frames.iter().zip(rgb) {
            files.push((format!("{}/{}", view.as_str(), frame_file_name(f.index)), bytes));
        }
        let depth = par::try_map_indexed(&ep.frames, Parallelism::Rayon, |_, f| {
            f.depths.get(view).as_ref().map(encode_depth_png16).transpose()
        })?;
        for (f, bytes) in ep.frames.iter().zip(depth) {
            if let Some(bytes) = bytes {
                files.push((format!("{}/{}", view.depth_dir(), frame_file_name(f.index)), bytes));
            }
        }
    }
    let states: Vec<LowDimState> = ep.frames.iter().map(|f| f.state).collect();
    files.push((LOWDIM_FILE.to_string(), write_lowdim_csv(&states)?));
    files.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(files)
}

/// Writes an episode under `root/episodes/<id>/`, replacing any previous
/// copy, and returns its checksum.
pub fn write_episode(root: &Path, ep: &Episode) -> Result<String> {
    ep.validate()?;
    let dir = episode_dir(root, &ep.id);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let files = episode_files(ep)?;
    for (rel, bytes) in &files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    let meta = EpisodeMeta {
        id: ep.id.clone(),
        exposure: ep.exposure.value(),
        rate_hz: ep.rate_hz,
        frames: ep.len(),
    };
    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_vec_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))?;
    Ok(checksum_of(&files))
}

pub(crate) fn read_meta(dir: &Path) -> Result<EpisodeMeta> {
    let path = dir.join(META_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Loads an episode written by [`write_episode`]. Depth is attached for a
/// view when its depth directory exists.
pub fn read_episode(root: &Path, id: &str) -> Result<Episode> {
    validate_episode_id(id)?;
    let dir = episode_dir(root, id);
    let meta = read_meta(&dir)?;
    if meta.id != id {
        return Err(Error::Validation(format!("{}: meta id {:?} does not match", dir.display(), meta.id)));
    }
    let exposure = ExposureLevel::new(meta.exposure)?;
    let front = read_view(&dir, ViewName::Front)?;
    let wrist = read_view(&dir, ViewName::Wrist)?;
    let lowdim_path = dir.join(super::io::LOWDIM_FILE);
    let lowdim = fs::read(&lowdim_path).map_err(|e| Error::io(&lowdim_path, e))?;
    let states = read_lowdim_csv(&lowdim, &lowdim_path.display().to_string())?;
    if front.len() != wrist.len() || front.len() != states.len() {
        return Err(Error::Ingestion(format!(
            "episode {id}: front {} / wrist {} / low-dim {} counts differ",
            front.len(),
            wrist.len(),
            states.len()
        )));
    }
    let mut frames: Vec<Frame> = front
        .into_iter()
        .zip(wrist)
        .zip(states)
        .enumerate()
        .map(|(i, ((f, w), s))| Frame::new(i as u64, Views::new(f, w), s))
        .collect();
    for view in ViewName::ALL {
        let depth_dir = dir.join(view.depth_dir());
        if !depth_dir.is_dir() {
            continue;
        }
        let maps = read_depth_view(&depth_dir)?;
        if maps.len() != frames.len() {
            return Err(Error::Ingestion(format!(
                "episode {id}: {} has {} maps for {} frames",
                view.depth_dir(),
                maps.len(),
                frames.len()
            )));
        }
        for (frame, d) in frames.iter_mut().zip(maps) {
            frame.set_depth(view, d)?;
        }
    }
    let mut ep = Episode::new(id, frames, exposure)?;
    ep.rate_hz = meta.rate_hz;
    ep.validate()?;
    Ok(ep)
}

fn read_view(dir: &Path, view: ViewName) -> Result<Vec<RgbImage>> {
    let paths = list_pngs(&dir.join(view.as_str()))?;
    par::try_map_indexed(&paths, Parallelism::Rayon, |_, p| read_png8(p))
}

pub(crate) fn read_depth_view(depth_dir: &Path) -> Result<Vec<DepthMap>> {
    let paths = list_pngs(depth_dir)?;
    par::try_map_indexed(&paths, Parallelism::Rayon, |_, p| read_depth_png16(p))
}

/// Writes every manifest-listed episode plus `manifest.json`. The manifest's
/// checksums must match what gets written.
pub fn write_dataset(root: &Path, manifest: &DatasetManifest, episodes: &[Episode]) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for entry in &manifest.episodes {
        let ep = episodes
            .iter()
            .find(|e| e.id == entry.id)
            .ok_or_else(|| Error::Validation(format!("manifest lists unknown episode {}", entry.id)))?;
        let sum = write_episode(root, ep)?;
        if sum != entry.checksum {
            return Err(Error::Validation(format!(
                "episode {}: written checksum {sum} differs from manifest {}",
                entry.id, entry.checksum
            )));
        }
    }
    manifest.write(&root.join(MANIFEST_FILE))
}

/// Loads the manifest and every episode it lists.
pub fn read_dataset(root: &Path) -> Result<(DatasetManifest, Vec<Episode>)> {
    let manifest = DatasetManifest::read(&root.join(MANIFEST_FILE))?;
    let episodes = manifest
        .episodes
        .iter()
        .map(|e| read_episode(root, &e.id))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, episodes))
}

pub(crate) fn rate_ok(rate: u32) -> bool {
    rate == RATE_HZ
}
