use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::io::{
    episode_dir, frame_file_name, list_pngs, rate_ok, read_lowdim_csv, read_meta, LOWDIM_FILE, MANIFEST_FILE, META_FILE,
};
use super::manifest::{checksum_of, DatasetManifest, ManifestEntry};
use super::ViewName;
use crate::par::{self, Parallelism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Manifest,
    DuplicateEpisode,
    MissingEpisode,
    UnlistedEpisode,
    Metadata,
    ExposureMismatch,
    VariantConsistency,
    FrameCount,
    FrameNaming,
    CorruptImage,
    CorruptDepth,
    Alignment,
    LowDim,
    Checksum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub path: PathBuf,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub episodes_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<PathBuf>, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            kind,
            message: message.into(),
        });
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Checks layout, manifest checksums, episode invariants and depth alignment.
/// Problems are collected, never raised.
///
/// A checksum mismatch is only reported for an episode whose files are
/// otherwise individually valid, so one damaged file yields one violation.
pub fn validate_dataset(root: &Path) -> ValidationReport {
    let mut report = ValidationReport::default();
    let manifest_path = root.join(MANIFEST_FILE);
    let manifest = match DatasetManifest::read(&manifest_path) {
        Ok(m) => m,
        Err(e) => {
            report.push(&manifest_path, ViolationKind::Manifest, e.to_string());
            return report;
        }
    };
    if manifest.format_version != super::manifest::MANIFEST_VERSION {
        report.push(
            &manifest_path,
            ViolationKind::Manifest,
            format!("unsupported format_version {}", manifest.format_version),
        );
    }
    let mut seen = HashSet::new();
    for entry in &manifest.episodes {
        if !seen.insert(entry.id.clone()) {
            report.push(&manifest_path, ViolationKind::DuplicateEpisode, format!("episode {} listed twice", entry.id));
        }
    }
    for (id, msg) in manifest.variant_violations() {
        report.push(&manifest_path, ViolationKind::VariantConsistency, format!("episode {id}: {msg}"));
    }
    for entry in &manifest.episodes {
        validate_episode(root, &manifest, entry, &mut report);
        report.episodes_checked += 1;
    }
    if let Ok(listing) = fs::read_dir(root.join("episodes")) {
        let mut unlisted: Vec<PathBuf> = listing
            .flatten()
            .filter(|e| e.path().is_dir())
            .filter(|e| !seen.contains(e.file_name().to_string_lossy().as_ref()))
            .map(|e| e.path())
            .collect();
        unlisted.sort();
        for path in unlisted {
            report.push(path, ViolationKind::UnlistedEpisode, "episode directory not listed in manifest");
        }
    }
    report
}

fn validate_episode(root: &Path, manifest: &DatasetManifest, entry: &ManifestEntry, report: &mut ValidationReport) {
    let dir = episode_dir(root, &entry.id);
    if super::validate_episode_id(&entry.id).is_err() || !dir.is_dir() {
        report.push(&dir, ViolationKind::MissingEpisode, format!("episode {} has no directory", entry.id));
        return;
    }
    let before = report.violations.len();

    match read_meta(&dir) {
        Ok(meta) => {
            let meta_path = dir.join(META_FILE);
            if meta.id != entry.id {
                report.push(&meta_path, ViolationKind::Metadata, format!("meta id {:?} != {:?}", meta.id, entry.id));
            }
            if !rate_ok(meta.rate_hz) {
                report.push(&meta_path, ViolationKind::Metadata, format!("rate {} Hz, expected 30", meta.rate_hz));
            }
            if meta.exposure != entry.exposure {
                report.push(
                    &meta_path,
                    ViolationKind::ExposureMismatch,
                    format!("manifest records exposure {} but frames are tagged {}", entry.exposure, meta.exposure),
                );
            }
            if !entry.source.admits(meta.exposure) {
                report.push(
                    &meta_path,
                    ViolationKind::VariantConsistency,
                    format!(
                        "frames tagged exposure {} violate the {:?} constraint of a {:?} dataset",
                        meta.exposure, entry.source, manifest.variant
                    ),
                );
            }
            if meta.frames != entry.frames {
                report.push(
                    &meta_path,
                    ViolationKind::FrameCount,
                    format!("meta lists {} frames, manifest {}", meta.frames, entry.frames),
                );
            }
        }
        Err(e) => report.push(dir.join(META_FILE), ViolationKind::Metadata, e.to_string()),
    }

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut rgb_dims: Vec<Vec<Option<(usize, usize)>>> = Vec::new();
    let mut counts = Vec::new();

    for view in ViewName::ALL {
        let (dims, n) = check_stream(&dir, view.as_str(), report, &mut files, |bytes| {
            crate::imagecore::decode_png8(bytes).map(|img| img.dims())
        });
        counts.push((view.as_str().to_string(), n));
        rgb_dims.push(dims);
    }
    for (vi, view) in ViewName::ALL.into_iter().enumerate() {
        if !dir.join(view.depth_dir()).is_dir() {
            continue;
        }
        let (dims, n) = check_stream(&dir, view.depth_dir(), report, &mut files, |bytes| {
            crate::depthio::decode_depth_png16(bytes).map(|d| d.dims())
        });
        counts.push((view.depth_dir().to_string(), n));
        for (i, (d, r)) in dims.iter().zip(&rgb_dims[vi]).enumerate() {
            if let (Some(d), Some(r)) = (d, r) {
                if d != r {
                    report.push(
                        dir.join(view.depth_dir()).join(frame_file_name(i as u64)),
                        ViolationKind::Alignment,
                        format!("depth is {}x{} but {} frame is {}x{}", d.0, d.1, view, r.0, r.1),
                    );
                }
            }
        }
    }

    let lowdim_path = dir.join(LOWDIM_FILE);
    match fs::read(&lowdim_path) {
        Ok(bytes) => {
            match read_lowdim_csv(&bytes, &lowdim_path.display().to_string()) {
                Ok(rows) => counts.push((LOWDIM_FILE.to_string(), rows.len())),
                Err(e) => report.push(&lowdim_path, ViolationKind::LowDim, e.to_string()),
            }
            files.push((LOWDIM_FILE.to_string(), bytes));
        }
        Err(e) => report.push(&lowdim_path, ViolationKind::LowDim, e.to_string()),
    }

    let reference = counts.first().map(|c| c.1).unwrap_or(0);
    for (name, n) in &counts {
        if *n != reference {
            report.push(
                dir.join(name),
                ViolationKind::FrameCount,
                format!("{name} has {n} entries, front has {reference}"),
            );
        }
    }
    if reference != entry.frames {
        report.push(&dir, ViolationKind::FrameCount, format!("{reference} frames on disk, manifest lists {}", entry.frames));
    }
    if reference < 2 {
        report.push(&dir, ViolationKind::FrameCount, format!("episode has {reference} frames, need at least 2"));
    }

    if report.violations.len() == before {
        files.sort_by(|a, b| a.0.cmp(&b.0));
        let sum = checksum_of(&files);
        if sum != entry.checksum {
            report.push(&dir, ViolationKind::Checksum, format!("checksum {sum} differs from manifest {}", entry.checksum));
        }
    }
}

/// Reads and decodes every PNG of one stream directory, recording naming and
/// decoding problems. Returns per-frame dimensions (None when undecodable)
/// and the file count.
fn check_stream<F>(
    dir: &Path,
    sub: &str,
    report: &mut ValidationReport,
    files: &mut Vec<(String, Vec<u8>)>,
    decode: F,
) -> (Vec<Option<(usize, usize)>>, usize)
where
    F: Fn(&[u8]) -> crate::Result<(usize, usize)> + Sync + Send,
{
    let stream_dir = dir.join(sub);
    let is_depth = sub.starts_with("depth_");
    let corrupt = if is_depth { ViolationKind::CorruptDepth } else { ViolationKind::CorruptImage };
    let paths = match list_pngs(&stream_dir) {
        Ok(p) => p,
        Err(e) => {
            report.push(&stream_dir, ViolationKind::FrameCount, e.to_string());
            return (Vec::new(), 0);
        }
    };
    let loaded = par::map_indexed(&paths, Parallelism::Rayon, |_, p| {
        let bytes = fs::read(p);
        let dims = bytes.as_ref().map_err(|e| e.to_string()).and_then(|b| decode(b).map_err(|e| e.to_string()));
        (bytes.ok(), dims)
    });
    let mut dims = Vec::with_capacity(paths.len());
    for (i, (path, (bytes, decoded))) in paths.iter().zip(loaded).enumerate() {
        let expected = frame_file_name(i as u64);
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if name != expected {
            report.push(path, ViolationKind::FrameNaming, format!("expected {expected} at position {i}"));
        }
        match decoded {
            Ok(d) => dims.push(Some(d)),
            Err(e) => {
                report.push(path, corrupt, e);
                dims.push(None);
            }
        }
        if let Some(b) = bytes {
            files.push((format!("{sub}/{name}"), b));
        }
    }
    (dims, paths.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::testutil::episode;
    use crate::dataset::{write_dataset, DatasetVariant};
    use crate::depthio::DepthMap;

    fn build(root: &Path, with_depth: bool) -> DatasetManifest {
        let mut eps = vec![episode("ep_a", 3, 120), episode("ep_b", 2, 120)];
        if with_depth {
            for ep in &mut eps {
                for f in &mut ep.frames {
                    f.set_depth(ViewName::Front, DepthMap::zeros(8, 6)).unwrap();
                    f.set_depth(ViewName::Wrist, DepthMap::zeros(8, 6)).unwrap();
                }
            }
        }
        let m = DatasetManifest::single_source(DatasetVariant::Fixed120, &eps).unwrap();
        write_dataset(root, &m, &eps).unwrap();
        m
    }

    #[test]
    fn pristine_dataset_is_clean() {
        let tmp = tempfile::tempdir().unwrap();
        build(tmp.path(), true);
        let r = validate_dataset(tmp.path());
        assert!(r.is_clean(), "{:?}", r.violations);
        assert_eq!(r.episodes_checked, 2);
    }

    #[test]
    fn one_corrupted_png_is_one_violation() {
        let tmp = tempfile::tempdir().unwrap();
        build(tmp.path(), false);
        let bad = episode_dir(tmp.path(), "ep_a").join("wrist").join(frame_file_name(1));
        fs::write(&bad, b"\x89PNG broken").unwrap();
        let r = validate_dataset(tmp.path());
        assert_eq!(r.violations.len(), 1, "{:?}", r.violations);
        assert_eq!(r.violations[0].path, bad);
        assert_eq!(r.violations[0].kind, ViolationKind::CorruptImage);
    }

    #[test]
    fn exposure_tag_mismatch_breaks_variant() {
        let tmp = tempfile::tempdir().unwrap();
        build(tmp.path(), false);
        let meta = episode_dir(tmp.path(), "ep_b").join("meta.json");
        let text = fs::read_to_string(&meta).unwrap().replace("\"exposure\": 120", "\"exposure\": 80");
        fs::write(&meta, text).unwrap();
        let r = validate_dataset(tmp.path());
        assert_eq!(r.count(ViolationKind::VariantConsistency), 1, "{:?}", r.violations);
        assert_eq!(r.count(ViolationKind::ExposureMismatch), 1);
    }

    #[test]
    fn silent_edit_caught_by_checksum() {
        let tmp = tempfile::tempdir().unwrap();
        build(tmp.path(), false);
        let csv = episode_dir(tmp.path(), "ep_a").join(LOWDIM_FILE);
        let text = fs::read_to_string(&csv).unwrap().replacen("-0.25", "-0.26", 1);
        fs::write(&csv, text).unwrap();
        let r = validate_dataset(tmp.path());
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::Checksum);
    }

    #[test]
    fn misaligned_depth_and_missing_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        build(tmp.path(), true);
        let d = episode_dir(tmp.path(), "ep_b").join("depth_front").join(frame_file_name(0));
        crate::depthio::write_depth_png16(&d, &DepthMap::zeros(4, 3)).unwrap();
        let r = validate_dataset(tmp.path());
        assert_eq!(r.count(ViolationKind::Alignment), 1, "{:?}", r.violations);

        let empty = tempfile::tempdir().unwrap();
        let r = validate_dataset(empty.path());
        assert_eq!(r.count(ViolationKind::Manifest), 1);
    }

    #[test]
    fn unlisted_and_missing_episodes() {
        let tmp = tempfile::tempdir().unwrap();
        build(tmp.path(), false);
        fs::create_dir_all(tmp.path().join("episodes").join("stray")).unwrap();
        fs::remove_dir_all(episode_dir(tmp.path(), "ep_b")).unwrap();
        let r = validate_dataset(tmp.path());
        assert_eq!(r.count(ViolationKind::UnlistedEpisode), 1);
        assert_eq!(r.count(ViolationKind::MissingEpisode), 1);
    }
}
