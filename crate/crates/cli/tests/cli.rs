use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use augpipe_core::dataset::{write_lowdim_csv, LowDimState};
use augpipe_core::evalharness::{published_table_fixture, round_half_up};
use augpipe_core::imagecore::{write_png8, RgbImage};
use augpipe_core::obswindow::FusedObservation;
use tempfile::TempDir;

fn augpipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_augpipe"))
        .args(args)
        .env_remove("AUGPIPE_SEED")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn image(seed: u32, w: usize, h: usize) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let v = |k: u32| ((x as u32 * 31 + y as u32 * 17 + seed * 7 + k * 13) % 97) as f32 / 96.0;
        [v(0), v(1), v(2)]
    })
}

/// Raw episode directory: front/, wrist/ and lowdim.csv.
fn raw_episode(dir: &Path, seed: u32, frames: usize) {
    for view in ["front", "wrist"] {
        fs::create_dir_all(dir.join(view)).unwrap();
        for i in 0..frames {
            let img = image(seed + i as u32 + (view == "wrist") as u32 * 50, 12, 9);
            write_png8(&dir.join(view).join(format!("{i:04}.png")), &img).unwrap();
        }
    }
    let states: Vec<LowDimState> = (0..frames)
        .map(|i| LowDimState::from_row([0.01 * i as f64, 0.2, 0.3, 0.0, 0.1, -0.1, (i % 2) as f64]).unwrap())
        .collect();
    fs::write(dir.join("lowdim.csv"), write_lowdim_csv(&states).unwrap()).unwrap();
}

fn ingest(raw: &Path, out: &Path, id: &str, exposure: u32) {
    let o = augpipe(&["ingest", "--in", p(raw), "--out", p(out), "--episode", id, "--exposure", &exposure.to_string()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

/// Composed dataset with depth, built through the CLI only.
fn composed_dataset(tmp: &Path) -> PathBuf {
    let fixed = tmp.join("fixed");
    let varied = tmp.join("varied");
    for (i, (exposure, target)) in [(120, &fixed), (120, &fixed), (60, &varied), (160, &varied)].into_iter().enumerate() {
        let raw = tmp.join(format!("raw{i}"));
        raw_episode(&raw, i as u32 * 100, 3);
        ingest(&raw, target, &format!("ep{i}"), exposure);
    }
    let out = tmp.join("combined");
    let o = augpipe(&["compose", "--fixed", p(&fixed), "--varied", p(&varied), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2), "target_count is required");
    let cfg = tmp.join("compose.toml");
    fs::write(&cfg, "[compose]\ntarget_count = 3\n").unwrap();
    let o = augpipe(&["compose", "--config", p(&cfg), "--fixed", p(&fixed), "--varied", p(&varied), "--out", p(&out), "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = augpipe(&["depth", "--in", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|path| (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn unknown_verb_is_a_usage_error() {
    let o = augpipe(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).to_lowercase().contains("usage"));
    assert_eq!(augpipe(&[]).status.code(), Some(2));
    assert_eq!(augpipe(&["validate", "--in", "x", "--bogus"]).status.code(), Some(2));
}

#[test]
fn augment_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let frames = tmp.path().join("ep_a");
    fs::create_dir_all(&frames).unwrap();
    for i in 0..4 {
        write_png8(&frames.join(format!("{i:04}.png")), &image(i, 20, 15)).unwrap();
    }
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[augblender]\nbeta = 0.5\n").unwrap();
    let run = |out: &str, seed: &str, jobs: &str| {
        let out = tmp.path().join(out);
        let o = augpipe(&["augment", "--config", p(&cfg), "--in", p(&frames), "--out", p(&out), "--seed", seed, "--jobs", jobs]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        read_tree(&out)
    };
    let a = run("a", "42", "0");
    let b = run("b", "42", "1");
    assert_eq!(a.len(), 4);
    assert_eq!(a, b);
    assert_ne!(a, run("c", "43", "0"));
    assert_ne!(a, read_tree(&frames));
}

#[test]
fn seed_env_fallback() {
    let tmp = TempDir::new().unwrap();
    let frames = tmp.path().join("ep_b");
    fs::create_dir_all(&frames).unwrap();
    write_png8(&frames.join("0000.png"), &image(3, 10, 8)).unwrap();
    let run = |out: &str, env: Option<&str>, seed: Option<&str>| {
        let out = tmp.path().join(out);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_augpipe"));
        cmd.args(["augment", "--in", p(&frames), "--out", p(&out)]);
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        match env {
            Some(v) => cmd.env("AUGPIPE_SEED", v),
            None => cmd.env_remove("AUGPIPE_SEED"),
        };
        let o = cmd.output().unwrap();
        (o.status.code(), if o.status.success() { read_tree(&out) } else { vec![] })
    };
    let (code, via_env) = run("env", Some("9"), None);
    assert_eq!(code, Some(0));
    assert_eq!(via_env, run("flag", None, Some("9")).1);
    // The flag wins over the environment.
    assert_eq!(via_env, run("both", Some("1"), Some("9")).1);
    assert_eq!(run("bad", Some("nine"), None).0, Some(2));
}

#[test]
fn composed_dataset_validates_and_packs() {
    let tmp = TempDir::new().unwrap();
    let data = composed_dataset(tmp.path());
    let o = augpipe(&["validate", "--in", p(&data), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["episodes_checked"], 3);
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);

    // N must come from the config.
    let packed = tmp.path().join("packed");
    assert_eq!(augpipe(&["pack", "--in", p(&data), "--out", p(&packed)]).status.code(), Some(2));
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[window]\nsteps = 2\n").unwrap();
    let o = augpipe(&["pack", "--config", p(&cfg), "--in", p(&data), "--out", p(&packed)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dirs: Vec<String> = fs::read_dir(&packed).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(dirs.len(), 3);
    let ep = packed.join(&dirs[0]);
    let files = read_tree(&ep);
    assert_eq!(files.len(), 3);
    assert!(files[0].0.ends_with(".agpf"));
    let obs = FusedObservation::from_bytes(&files[2].1).unwrap();
    assert_eq!((obs.steps(), obs.width(), obs.height()), (2, 12, 9));
    assert_eq!(obs.to_bytes(), files[2].1);
}

#[test]
fn validate_flags_corruption() {
    let tmp = TempDir::new().unwrap();
    let data = composed_dataset(tmp.path());
    let victim = fs::read_dir(data.join("episodes"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir())
        .unwrap();
    let png = victim.join("front").join("frame_000001.png");
    assert!(png.exists(), "{}", png.display());
    fs::write(&png, b"not a png").unwrap();
    let o = augpipe(&["validate", "--in", p(&data)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("CorruptImage"));
}

#[test]
fn ingest_rejects_inadmissible_exposure() {
    let tmp = TempDir::new().unwrap();
    let raw = tmp.path().join("raw");
    raw_episode(&raw, 0, 2);
    let fixed = tmp.path().join("fixed");
    ingest(&raw, &fixed, "first", 120);
    let o = augpipe(&["ingest", "--in", p(&raw), "--out", p(&fixed), "--episode", "second", "--exposure", "60"]);
    assert_eq!(o.status.code(), Some(1));
    let o = augpipe(&["ingest", "--in", p(&raw), "--out", p(&fixed), "--episode", "third", "--exposure", "500"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_csv_reproduces_fixture_averages() {
    let tmp = TempDir::new().unwrap();
    let rows = published_table_fixture();
    for (i, row) in rows.iter().enumerate() {
        let json = serde_json::to_vec(&row.report()).unwrap();
        fs::write(tmp.path().join(format!("{i:02}.json")), json).unwrap();
    }
    let o = augpipe(&["report", "--in", p(tmp.path()), "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), rows.len() + 1);
    for (line, row) in lines[1..].iter().zip(&rows) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], row.task);
        let avg: i64 = cols.last().unwrap().parse().unwrap();
        let sum: f64 = row.rates.iter().sum();
        assert_eq!(avg, round_half_up(sum / 10.0));
        if (row.task, row.method) != ("PickBig", "DP+Depth") {
            assert_eq!(avg, row.published_avg, "{line}");
        }
    }
    assert_eq!(augpipe(&["report", "--in", p(tmp.path()), "--format", "xml"]).status.code(), Some(2));
}
