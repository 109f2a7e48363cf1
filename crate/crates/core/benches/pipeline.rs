use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use augpipe_core::augblender::{augblend_batch, AugBlenderConfig};
use augpipe_core::evalharness::{evaluate_pipeline, PipelineConfig, SweepConfig, Task};
use augpipe_core::imagecore::RgbImage;
use augpipe_core::par::Parallelism;
use augpipe_core::seed::FrameKey;

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("rayon", Parallelism::Rayon)];

fn frames(n: usize, w: usize, h: usize) -> Vec<(RgbImage, FrameKey)> {
    (0..n)
        .map(|i| {
            let img = RgbImage::from_fn(w, h, |x, y| {
                [x as f32 / w as f32, y as f32 / h as f32, ((x ^ y) + i) as f32 % 256.0 / 255.0]
            });
            (img, FrameKey::new("bench", i as u64))
        })
        .collect()
}

fn augblend(c: &mut Criterion) {
    let cfg = AugBlenderConfig::default();
    let batch = frames(8, 640, 480);
    let mut g = c.benchmark_group("augblend_batch_640x480");
    g.sample_size(10);
    g.throughput(Throughput::Elements(batch.len() as u64));
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| augblend_batch(&batch, &cfg, mode).unwrap())
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let cfg = SweepConfig {
        trials_per_level: 4,
        training_scenes: 60,
        augmented_copies: 1,
        ..Default::default()
    };
    let pipeline = PipelineConfig::full(AugBlenderConfig::default());
    let mut g = c.benchmark_group("exposure_sweep");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| evaluate_pipeline(Task::PickBig, &pipeline, &cfg, mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, augblend, sweep);
criterion_main!(benches);
