//! Runs the four ablation pipelines on one synthetic task and prints the
//! per-exposure success table.
//!
//! cargo run --release -p augpipe-core --example ablation [seed] [task] [literal|normalized]

use augpipe_core::augblender::{AccumulationMode, AugBlenderConfig};
use augpipe_core::evalharness::{aggregate_and_render, evaluate_pipeline, PipelineConfig, ReportFormat, SweepConfig, Task};
use augpipe_core::par::Parallelism;

fn main() -> augpipe_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed = args.first().and_then(|s| s.parse().ok()).unwrap_or(0);
    let task: Task = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(Task::PickBig);
    let cfg = SweepConfig {
        seed,
        ..Default::default()
    };
    let mut aug = AugBlenderConfig {
        master_seed: seed,
        ..Default::default()
    };
    if args.get(2).map(String::as_str) == Some("normalized") {
        aug.accumulation_mode = AccumulationMode::Normalized;
    }
    let mut reports = Vec::new();
    for p in PipelineConfig::ablation(&aug) {
        let t = std::time::Instant::now();
        reports.push(evaluate_pipeline(task, &p, &cfg, Parallelism::Rayon)?);
        eprintln!("{}: {:.1} s", p.method, t.elapsed().as_secs_f64());
    }
    print!("{}", aggregate_and_render(&reports, ReportFormat::Markdown)?);
    Ok(())
}
