use std::time::Duration;

use super::io::read_depth_view;
use super::{Episode, ViewName};
use crate::depthio::protocol::BackendSession;
use crate::depthio::{synthetic_depth_oracle, BackendKind, DepthBackendSpec, DepthMap};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};

/// Computes depth for every frame and view of an episode and attaches it.
///
/// RGB and low-dim data are never modified. Backends are deterministic, so
/// running this twice leaves the episode unchanged.
pub fn precompute_depth(ep: &mut Episode, spec: &DepthBackendSpec) -> Result<()> {
    precompute_with(ep, spec, Parallelism::Rayon)
}

/// [`precompute_depth`] over many episodes. In-process backends run episodes
/// in parallel under `mode`; external processes run one episode at a time.
pub fn precompute_depth_all(episodes: &mut [Episode], spec: &DepthBackendSpec, mode: Parallelism) -> Result<()> {
    match spec.kind {
        BackendKind::ExternalProcess { .. } => {
            for ep in episodes.iter_mut() {
                precompute_with(ep, spec, Parallelism::Sequential)?;
            }
            Ok(())
        }
        _ => {
            let results = par::map_indexed_mut(episodes, mode, |_, ep| precompute_with(ep, spec, Parallelism::Sequential));
            results.into_iter().collect()
        }
    }
}

fn precompute_with(ep: &mut Episode, spec: &DepthBackendSpec, mode: Parallelism) -> Result<()> {
    let maps: Vec<(ViewName, Vec<DepthMap>)> = match &spec.kind {
        BackendKind::SyntheticOracle { blur_radius } => ViewName::ALL
            .into_iter()
            .map(|view| {
                let maps = par::map_indexed(&ep.frames, mode, |_, f| synthetic_depth_oracle(f.views.get(view), *blur_radius));
                (view, maps)
            })
            .collect(),
        BackendKind::ExternalProcess { command } => external(ep, spec, command)?,
        BackendKind::Precomputed { directory } => {
            let root = directory.join(&ep.id);
            let mut out = Vec::new();
            for view in ViewName::ALL {
                let dir = root.join(view.depth_dir());
                let maps = read_depth_view(&dir)
                    .map_err(|e| Error::Backend(format!("episode {} view {view}: {e}", ep.id)))?;
                if maps.len() != ep.len() {
                    return Err(Error::Alignment(format!(
                        "episode {} view {view}: {} has {} depth maps for {} frames",
                        ep.id,
                        dir.display(),
                        maps.len(),
                        ep.len()
                    )));
                }
                out.push((view, maps));
            }
            out
        }
    };
    // Check every map before touching the episode so a failure leaves it intact.
    for (view, maps) in &maps {
        for (f, d) in ep.frames.iter().zip(maps) {
            crate::depthio::verify_alignment(f.views.get(*view), d)
                .map_err(|e| Error::Alignment(format!("episode {} view {view} frame {}: {e}", ep.id, f.index)))?;
        }
    }
    for (view, maps) in maps {
        for (f, d) in ep.frames.iter_mut().zip(maps) {
            f.set_depth(view, d)?;
        }
    }
    Ok(())
}

/// One backend session per episode: all front frames, then all wrist frames.
fn external(ep: &Episode, spec: &DepthBackendSpec, command: &[String]) -> Result<Vec<(ViewName, Vec<DepthMap>)>> {
    if !(spec.frame_timeout_secs > 0.0 && spec.frame_timeout_secs.is_finite()) {
        return Err(Error::Config(format!("frame timeout must be positive, got {}", spec.frame_timeout_secs)));
    }
    let mut session = BackendSession::start(command, &spec.model_variant, Duration::from_secs_f64(spec.frame_timeout_secs))
        .map_err(|e| Error::Backend(format!("episode {}: {e}", ep.id)))?;
    let mut out = Vec::new();
    let mut seq = 0;
    for view in ViewName::ALL {
        let mut maps = Vec::with_capacity(ep.len());
        for f in &ep.frames {
            let d = session.estimate(seq, f.views.get(view)).map_err(|e| {
                let ctx = format!("episode {} view {view} frame {}", ep.id, f.index);
                match e {
                    Error::Alignment(m) => Error::Alignment(format!("{ctx}: {m}")),
                    other => Error::Backend(format!("{ctx}: {other}")),
                }
            })?;
            maps.push(d);
            seq += 1;
        }
        out.push((view, maps));
    }
    session.finish()?;
    Ok(out)
}
