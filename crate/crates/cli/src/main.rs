//! `augpipe`: one binary for every pipeline stage.
//!
//! Numeric parameters come from the TOML config (`--config`); the command
//! line carries only verbs, paths and seeds. Exit status: 0 success,
//! 1 failure (including validation violations), 2 usage or config error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use augpipe_core::augblender::augblend;
use augpipe_core::config::PipelineFileConfig;
use augpipe_core::corruption::ExposureLevel;
use augpipe_core::dataset::{
    compose_mixed_split, episode_checksum, frame_file_name, ingest_episode, precompute_depth_all, read_dataset,
    read_episode, validate_dataset, write_dataset, DatasetManifest, DatasetVariant, Episode, EpisodeSource,
};
use augpipe_core::evalharness::{aggregate_and_render, evaluate_pipeline, PipelineConfig, ReportFormat, SweepReport};
use augpipe_core::imagecore::{read_png8, write_png8};
use augpipe_core::obswindow::{assemble_window, pack_fused_observation};
use augpipe_core::par::{self, Parallelism};
use augpipe_core::seed::FrameKey;
use augpipe_core::Error;
use clap::{Parser, Subcommand};

const SEED_ENV: &str = "AUGPIPE_SEED";

#[derive(Parser, Debug)]
#[command(name = "augpipe", version, about = "Deterministic RGB+depth perception data pipeline")]
struct Cli {
    /// Pipeline config (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; falls back to $AUGPIPE_SEED, then to the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// AugBlender over a directory of PNG frames.
    Augment {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long = "out", value_name = "DIR")]
        output: PathBuf,
        /// Episode id used for seeding; defaults to the input directory name.
        #[arg(long)]
        episode: Option<String>,
    },
    /// Precompute depth for every episode of a dataset with the configured backend.
    Depth {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        /// Output dataset root; defaults to rewriting the input in place.
        #[arg(long = "out", value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Ingest a raw episode (front/, wrist/, lowdim.csv) into a dataset.
    Ingest {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long = "out", value_name = "DIR")]
        output: PathBuf,
        #[arg(long)]
        episode: String,
        /// Exposure the episode was recorded at.
        #[arg(long)]
        exposure: u32,
    },
    /// Seeded mixture of a fixed-exposure and a varied-exposure dataset.
    Compose {
        #[arg(long, value_name = "DIR")]
        fixed: PathBuf,
        #[arg(long, value_name = "DIR")]
        varied: PathBuf,
        #[arg(long = "out", value_name = "DIR")]
        output: PathBuf,
    },
    /// Check a dataset; exits 1 when any violation is found.
    Validate {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Export fused observations for every decision step.
    Pack {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long = "out", value_name = "DIR")]
        output: PathBuf,
        /// Only this episode.
        #[arg(long)]
        episode: Option<String>,
        /// Apply AugBlender to the RGB channels.
        #[arg(long)]
        augment: bool,
    },
    /// Exposure sweep on the synthetic task; writes one JSON report per pipeline.
    Sweep {
        #[arg(long = "out", value_name = "DIR")]
        output: PathBuf,
    },
    /// Render sweep reports (*.json in a directory, by file name) as a table.
    Report {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long, default_value = "markdown", value_parser = ["markdown", "md", "csv"])]
        format: String,
        /// Write to a file instead of stdout.
        #[arg(long = "out", value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Validation,
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let jobs = cli.jobs;
    match par::with_jobs(jobs, move || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("augpipe: {msg}");
            eprintln!("usage: augpipe [--config FILE] [--seed N] [--jobs N] <augment|depth|ingest|compose|validate|pack|sweep|report> ...");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("augpipe: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<PipelineFileConfig> {
    let cfg = match &cli.config {
        Some(path) => PipelineFileConfig::load(path)?,
        None => PipelineFileConfig::default(),
    };
    Ok(cfg)
}

/// `--seed`, else `$AUGPIPE_SEED`, else `None` (keep the config's seed).
fn master_seed(cli: &Cli) -> CliResult<Option<u64>> {
    if let Some(s) = cli.seed {
        return Ok(Some(s));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not an unsigned 64-bit integer"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> CliResult {
    let mut cfg = load_config(&cli)?;
    let seed = master_seed(&cli)?;
    if let Some(s) = seed {
        cfg.augblender.master_seed = s;
        cfg.sweep.sweep.seed = s;
    }
    match &cli.command {
        Command::Augment {
            input,
            output,
            episode,
        } => augment(&cfg, input, output, episode.as_deref()),
        Command::Depth { input, output } => depth(&cfg, input, output.as_deref().unwrap_or(input)),
        Command::Ingest {
            input,
            output,
            episode,
            exposure,
        } => ingest(input, output, episode, *exposure),
        Command::Compose { fixed, varied, output } => compose(&cfg, seed, fixed, varied, output),
        Command::Validate { input, json } => validate(input, *json),
        Command::Pack {
            input,
            output,
            episode,
            augment,
        } => pack(&cfg, input, output, episode.as_deref(), *augment),
        Command::Sweep { output } => sweep(&cfg, output),
        Command::Report { input, format, output } => report(input, format, output.as_deref()),
    }
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(Error::Io {
        path: dir.to_path_buf(),
        source: e,
    }))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| Failure::Runtime(Error::Io {
        path: path.to_path_buf(),
        source: e,
    }))
}

fn list_files(dir: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::Runtime(Error::Io {
        path: dir.to_path_buf(),
        source: e,
    }))?;
    let mut files: Vec<PathBuf> = entries
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
        .collect();
    files.sort();
    Ok(files)
}

fn augment(cfg: &PipelineFileConfig, input: &Path, output: &Path, episode: Option<&str>) -> CliResult {
    let episode = match episode {
        Some(e) => e.to_string(),
        None => input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| Failure::Usage(format!("cannot derive an episode id from {}", input.display())))?,
    };
    let frames = list_files(input, "png")?;
    if frames.is_empty() {
        return Err(Failure::Usage(format!("no PNG frames in {}", input.display())));
    }
    create_dir(output)?;
    let results = par::map_indexed(&frames, Parallelism::Rayon, |i, path| -> augpipe_core::Result<()> {
        let img = read_png8(path)?;
        let key = FrameKey::new(episode.clone(), i as u64);
        let out = augblend(&img, &cfg.augblender, &key)?;
        write_png8(&output.join(path.file_name().expect("listed files have names")), &out)
    });
    results.into_iter().collect::<augpipe_core::Result<()>>()?;
    eprintln!("augmented {} frames of {episode} into {}", frames.len(), output.display());
    Ok(())
}

/// Manifest entries refreshed from the episodes as they are now.
fn refresh_manifest(manifest: &DatasetManifest, episodes: &[Episode]) -> CliResult<DatasetManifest> {
    let mut m = manifest.clone();
    for (entry, ep) in m.episodes.iter_mut().zip(episodes) {
        entry.checksum = episode_checksum(ep)?;
        entry.frames = ep.len();
    }
    Ok(m)
}

fn depth(cfg: &PipelineFileConfig, input: &Path, output: &Path) -> CliResult {
    let (manifest, mut episodes) = read_dataset(input)?;
    precompute_depth_all(&mut episodes, &cfg.backend, Parallelism::Rayon)?;
    let manifest = refresh_manifest(&manifest, &episodes)?;
    write_dataset(output, &manifest, &episodes)?;
    eprintln!("depth computed for {} episodes into {}", episodes.len(), output.display());
    Ok(())
}

fn ingest(input: &Path, output: &Path, id: &str, exposure: u32) -> CliResult {
    let level = ExposureLevel::new(exposure)?;
    let ep = ingest_episode(&input.join("front"), &input.join("wrist"), &input.join("lowdim.csv"), level, id)?;
    let manifest_path = output.join("manifest.json");
    let (mut manifest, mut episodes) = if manifest_path.exists() {
        read_dataset(output)?
    } else {
        let variant = if exposure == augpipe_core::corruption::TRAINING_EXPOSURE {
            DatasetVariant::Fixed120
        } else {
            DatasetVariant::Varied
        };
        (DatasetManifest::single_source(variant, &[])?, Vec::new())
    };
    if manifest.episodes.iter().any(|e| e.id == id) {
        return Err(Failure::Usage(format!("episode {id} already in {}", output.display())));
    }
    let source = match manifest.variant {
        DatasetVariant::Fixed120 => EpisodeSource::Fixed,
        DatasetVariant::Varied => EpisodeSource::Varied,
        DatasetVariant::Combined => {
            return Err(Failure::Usage("cannot ingest into a combined dataset; use compose".into()))
        }
    };
    if !source.admits(exposure) {
        return Err(Failure::Runtime(Error::Composition(format!(
            "exposure {exposure} not admissible in a {:?} dataset",
            manifest.variant
        ))));
    }
    let single = DatasetManifest::single_source(manifest.variant, std::slice::from_ref(&ep))?;
    manifest.episodes.extend(single.episodes);
    episodes.push(ep);
    write_dataset(output, &manifest, &episodes)?;
    eprintln!("ingested {id} ({} frames) into {}", episodes.last().map_or(0, Episode::len), output.display());
    Ok(())
}

fn compose(cfg: &PipelineFileConfig, seed: Option<u64>, fixed: &Path, varied: &Path, output: &Path) -> CliResult {
    cfg.compose_target()?;
    let (_, fixed_eps) = read_dataset(fixed)?;
    let (_, varied_eps) = read_dataset(varied)?;
    let f = cfg.compose.fixed_fraction;
    let target = cfg.compose_target()?;
    let seed = seed.unwrap_or(cfg.augblender.master_seed);
    let manifest = compose_mixed_split(&fixed_eps, &varied_eps, f, target, seed)?;
    let all: Vec<Episode> = fixed_eps.into_iter().chain(varied_eps).collect();
    write_dataset(output, &manifest, &all)?;
    eprintln!("composed {} episodes into {}", manifest.episodes.len(), output.display());
    Ok(())
}

fn validate(input: &Path, json: bool) -> CliResult {
    let report = validate_dataset(input);
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for v in &report.violations {
            println!("{:?}\t{}\t{}", v.kind, v.path.display(), v.message);
        }
        println!(
            "{} episodes checked, {} violations",
            report.episodes_checked,
            report.violations.len()
        );
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn pack(cfg: &PipelineFileConfig, input: &Path, output: &Path, only: Option<&str>, augment: bool) -> CliResult {
    let steps = cfg.window_steps()?;
    let manifest = DatasetManifest::read(&input.join("manifest.json"))?;
    let ids: Vec<&str> = manifest
        .episodes
        .iter()
        .map(|e| e.id.as_str())
        .filter(|id| only.is_none_or(|o| o == *id))
        .collect();
    if let Some(o) = only {
        if ids.is_empty() {
            return Err(Failure::Usage(format!("episode {o} not in {}", input.display())));
        }
    }
    let aug = augment.then_some(&cfg.augblender);
    let mut count = 0;
    for id in ids {
        let ep = read_episode(input, id)?;
        let dir = output.join(id);
        create_dir(&dir)?;
        let blobs = par::try_map_indexed(&ep.frames, Parallelism::Rayon, |t, _| -> augpipe_core::Result<Vec<u8>> {
            Ok(pack_fused_observation(&assemble_window(&ep, t, steps, aug)?)?.to_bytes())
        })?;
        for (t, bytes) in blobs.iter().enumerate() {
            let name = frame_file_name(t as u64).replace(".png", ".agpf");
            write_file(&dir.join(name), bytes)?;
        }
        count += blobs.len();
    }
    eprintln!("packed {count} observations into {}", output.display());
    Ok(())
}

fn sweep(cfg: &PipelineFileConfig, output: &Path) -> CliResult {
    let task = cfg.sweep.task;
    let pipelines = if cfg.sweep.ablation {
        PipelineConfig::ablation(&cfg.augblender)
    } else {
        vec![PipelineConfig::full(cfg.augblender.clone())]
    };
    create_dir(output)?;
    let mut reports = Vec::new();
    for (i, p) in pipelines.iter().enumerate() {
        let r = evaluate_pipeline(task, p, &cfg.sweep.sweep, Parallelism::Rayon)?;
        let slug: String = p
            .method
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
            .collect();
        let path = output.join(format!("{:02}_{}_{slug}.json", i + 1, task.name().to_lowercase()));
        let json = serde_json::to_vec_pretty(&r).expect("report serializes");
        write_file(&path, &json)?;
        reports.push(r);
    }
    print!("{}", aggregate_and_render(&reports, ReportFormat::Markdown)?);
    Ok(())
}

fn report(input: &Path, format: &str, output: Option<&Path>) -> CliResult {
    let format: ReportFormat = format.parse()?;
    let files = list_files(input, "json")?;
    if files.is_empty() {
        return Err(Failure::Usage(format!("no *.json sweep reports in {}", input.display())));
    }
    let mut reports = Vec::new();
    for path in files {
        let bytes = fs::read(&path).map_err(|e| Failure::Runtime(Error::Io {
            path: path.clone(),
            source: e,
        }))?;
        let r: SweepReport = serde_json::from_slice(&bytes)
            .map_err(|e| Failure::Runtime(Error::Format(format!("{}: {e}", path.display()))))?;
        reports.push(r);
    }
    let doc = aggregate_and_render(&reports, format)?;
    match output {
        Some(p) => write_file(p, doc.as_bytes()),
        None => {
            print!("{doc}");
            Ok(())
        }
    }
}
