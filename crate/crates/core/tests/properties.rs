//! Property tests for the invariants each module promises.

use augpipe_core::augblender::{
    accumulate_mixed, execute_plan, plan_for_frame, sample_plan, AccumulationMode, AugBlenderConfig, PlanMode,
};
use augpipe_core::corruption::{simulate_exposure, sweep_levels, ExposureLevel};
use augpipe_core::dataset::{
    compose_mixed_split, episode_checksum, precompute_depth, read_lowdim_csv, write_lowdim_csv, Episode,
    EpisodeSource, Frame, LowDimState, ViewName, Views,
};
use augpipe_core::depthio::{decode_depth_png16, encode_depth_png16, DepthBackendSpec, DepthMap};
use augpipe_core::imagecore::{apply_color_op, mean_luminance, ColorOp, ColorOpKind, RgbImage};
use augpipe_core::obswindow::{assemble_window, pack_fused_observation, CHANNELS};
use augpipe_core::seed::{rng_from_seed, FrameKey};
use proptest::prelude::*;

fn image() -> impl Strategy<Value = RgbImage> {
    (1usize..7, 1usize..7).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0f32..=1.0, w * h * 3).prop_map(move |d| RgbImage::new(w, h, d).unwrap())
    })
}

fn color_op() -> impl Strategy<Value = ColorOp> {
    prop_oneof![
        (0.0f64..1.0).prop_map(|t| ColorOp::HueShift { turns: t }),
        (0.0f64..3.0).prop_map(|f| ColorOp::SaturationScale { factor: f }),
        (0.0f64..3.0).prop_map(|f| ColorOp::BrightnessScale { factor: f }),
        (0.0f64..3.0).prop_map(|f| ColorOp::ContrastScale { factor: f }),
        (0.0f64..=1.0).prop_map(|t| ColorOp::Solarize { threshold: t }),
        (0.05f64..5.0).prop_map(|g| ColorOp::Gamma { gamma: g }),
        (1u8..=8).prop_map(|b| ColorOp::Posterize { bits: b }),
        Just(ColorOp::Equalize),
    ]
}

fn state(i: usize) -> LowDimState {
    LowDimState::from_row([0.01 * i as f64, -0.2, 0.3, 0.0, 0.5, -0.5, (i % 2) as f64]).unwrap()
}

fn episode(id: &str, w: usize, h: usize, frames: usize, exposure: u32) -> Episode {
    let frames = (0..frames)
        .map(|i| {
            let front = RgbImage::from_fn(w, h, |x, y| [(x + i) as f32 / (w + frames) as f32, y as f32 / h as f32, 0.4]);
            let wrist = RgbImage::from_fn(w, h, |x, y| [0.3, ((x * y + i) % 7) as f32 / 7.0, 0.6]);
            Frame::new(i as u64, Views::new(front, wrist), state(i))
        })
        .collect();
    Episode::new(id, frames, ExposureLevel::new(exposure).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ops_stay_in_range(img in image(), op in color_op()) {
        let out = apply_color_op(&img, &op).unwrap();
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(apply_color_op(&img, &op).unwrap(), out);
    }

    #[test]
    fn ops_commute_with_permutations(img in image(), op in color_op()) {
        for perm in [RgbImage::flip_horizontal, RgbImage::flip_vertical, RgbImage::transpose] {
            let a = apply_color_op(&perm(&img), &op).unwrap();
            let b = perm(&apply_color_op(&img, &op).unwrap());
            prop_assert_eq!(a, b, "{:?}", op);
        }
    }

    #[test]
    fn identity_parameters_are_identities(img in image()) {
        for kind in ColorOpKind::ALL {
            if let Some(p) = kind.identity_param() {
                prop_assert_eq!(apply_color_op(&img, &kind.with_param(p)).unwrap(), img.clone(), "{:?}", kind);
            }
        }
    }

    #[test]
    fn augblend_commutes_with_permutations(img in image(), seed in any::<u64>()) {
        let cfg = AugBlenderConfig::default();
        let plan = sample_plan(&cfg, &mut rng_from_seed(seed)).unwrap();
        for perm in [RgbImage::flip_horizontal, RgbImage::flip_vertical, RgbImage::transpose] {
            let a = execute_plan(&perm(&img), &plan, cfg.accumulation_mode).unwrap();
            let b = perm(&execute_plan(&img, &plan, cfg.accumulation_mode).unwrap());
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_lambda_is_identity(img in image(), seed in any::<u64>()) {
        let cfg = AugBlenderConfig { lambda: 0.0, beta: 0.0, ..Default::default() };
        let plan = sample_plan(&cfg, &mut rng_from_seed(seed)).unwrap();
        prop_assert_eq!(plan.mode, PlanMode::MixedChains);
        for mode in [AccumulationMode::Literal, AccumulationMode::Normalized] {
            prop_assert_eq!(execute_plan(&img, &plan, mode).unwrap(), img.clone());
        }
    }

    #[test]
    fn normalized_accumulation_needs_no_clamping(img in image(), seed in any::<u64>()) {
        let cfg = AugBlenderConfig { beta: 0.0, ..Default::default() };
        let plan = sample_plan(&cfg, &mut rng_from_seed(seed)).unwrap();
        let acc = accumulate_mixed(&img, &plan, AccumulationMode::Normalized).unwrap();
        // Convex weights sum to 1 only up to rounding.
        prop_assert!(acc.iter().all(|&v| (-1e-6..=1.0 + 1e-6).contains(&v)), "{:?}", acc);
    }

    #[test]
    fn plans_do_not_depend_on_iteration_order(seed in any::<u64>(), n in 2usize..12) {
        let cfg = AugBlenderConfig { master_seed: seed, ..Default::default() };
        let keys: Vec<FrameKey> = (0..n as u64).map(|i| FrameKey::new(format!("ep{}", i % 3), i)).collect();
        let forward: Vec<_> = keys.iter().map(|k| plan_for_frame(&cfg, k).unwrap()).collect();
        let mut backward: Vec<_> = keys.iter().rev().map(|k| plan_for_frame(&cfg, k).unwrap()).collect();
        backward.reverse();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn exposure_is_monotone(img in image(), a in 0usize..10, b in 0usize..10) {
        let levels = sweep_levels();
        let (lo, hi) = (levels[a.min(b)], levels[a.max(b)]);
        let r = ExposureLevel::training();
        prop_assert!(mean_luminance(&simulate_exposure(&img, lo, r)) <= mean_luminance(&simulate_exposure(&img, hi, r)));
    }

    #[test]
    fn exposure_at_reference_round_trips(img in image()) {
        let r = ExposureLevel::training();
        prop_assert!(simulate_exposure(&img, r, r).max_abs_diff(&img).unwrap() <= 1e-6);
    }

    #[test]
    fn png16_round_trip(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let d = DepthMap::new(w, h, (0..w * h).map(|_| rng.random::<f32>()).collect()).unwrap();
        let bytes = encode_depth_png16(&d).unwrap();
        let back = decode_depth_png16(&bytes).unwrap();
        prop_assert!(d.max_abs_diff(&back).unwrap() <= 1.0 / 131070.0 + 1e-7);
        prop_assert_eq!(encode_depth_png16(&back).unwrap(), bytes);
    }

    #[test]
    fn lowdim_csv_is_lossless(rows in prop::collection::vec((prop::array::uniform6(-1e6f64..1e6), any::<bool>()), 1..20)) {
        let states: Vec<LowDimState> = rows
            .iter()
            .map(|(r, g)| LowDimState::from_row([r[0], r[1], r[2], r[3], r[4], r[5], f64::from(u8::from(*g))]).unwrap())
            .collect();
        let back = read_lowdim_csv(&write_lowdim_csv(&states).unwrap(), "prop").unwrap();
        prop_assert_eq!(back, states);
    }

    #[test]
    fn composition_proportions(nf in 0usize..8, nv in 0usize..8, target in 0usize..12, f in 0.0f64..=1.0, seed in any::<u64>()) {
        let fixed: Vec<Episode> = (0..nf).map(|i| episode(&format!("f{i}"), 2, 2, 2, 120)).collect();
        let varied: Vec<Episode> = (0..nv).map(|i| episode(&format!("v{i}"), 2, 2, 2, 60)).collect();
        let want_fixed = (f * target as f64 + 0.5).floor() as usize;
        match compose_mixed_split(&fixed, &varied, f, target, seed) {
            Ok(m) => {
                let got = m.episodes.iter().filter(|e| e.source == EpisodeSource::Fixed).count();
                prop_assert_eq!(got, want_fixed);
                prop_assert_eq!(m.episodes.len(), target);
                prop_assert_eq!(compose_mixed_split(&fixed, &varied, f, target, seed).unwrap(), m);
            }
            Err(_) => prop_assert!(want_fixed > nf || target - want_fixed > nv),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fused_shape_law(n in 1usize..5, w in 1usize..9, h in 1usize..9, frames in 2usize..5, t in 0usize..5) {
        let mut ep = episode("shape", w, h, frames, 120);
        precompute_depth(&mut ep, &DepthBackendSpec::synthetic(1)).unwrap();
        let t = t % frames;
        let obs = pack_fused_observation(&assemble_window(&ep, t, n, None).unwrap()).unwrap();
        for view in [ViewName::Front, ViewName::Wrist] {
            prop_assert_eq!(obs.view(view).len(), n * CHANNELS * h * w);
        }
        prop_assert_eq!(obs.lowdim().len(), n * 7);
        let again = pack_fused_observation(&assemble_window(&ep, t, n, None).unwrap()).unwrap();
        prop_assert_eq!(again.to_bytes(), obs.to_bytes());
    }

    #[test]
    fn augmentation_never_touches_depth(seed in any::<u64>(), n in 1usize..4, t in 0usize..4) {
        let mut ep = episode("aug", 6, 5, 4, 120);
        precompute_depth(&mut ep, &DepthBackendSpec::synthetic(1)).unwrap();
        let checksum = episode_checksum(&ep).unwrap();
        let cfg = AugBlenderConfig { master_seed: seed, beta: 0.5, ..Default::default() };
        let plain = pack_fused_observation(&assemble_window(&ep, t, n, None).unwrap()).unwrap();
        let aug = pack_fused_observation(&assemble_window(&ep, t, n, Some(&cfg)).unwrap()).unwrap();
        for view in [ViewName::Front, ViewName::Wrist] {
            for step in 0..n {
                prop_assert_eq!(plain.plane(view, step, 3), aug.plane(view, step, 3));
            }
        }
        prop_assert_eq!(plain.lowdim(), aug.lowdim());
        prop_assert_eq!(episode_checksum(&ep).unwrap(), checksum);
    }
}

#[test]
fn gate_law_holds_across_betas() {
    let n = 20_000;
    for (i, beta) in [0.0, 0.05, 0.16, 0.5, 0.9, 1.0].into_iter().enumerate() {
        let cfg = AugBlenderConfig { beta, ..Default::default() };
        let mut rng = rng_from_seed(1000 + i as u64);
        let direct = (0..n)
            .filter(|_| sample_plan(&cfg, &mut rng).unwrap().mode == PlanMode::DirectChain)
            .count();
        let frac = direct as f64 / n as f64;
        let band = 4.0 * (beta * (1.0 - beta) / n as f64).sqrt();
        assert!((frac - beta).abs() <= band, "beta {beta}: fraction {frac}, band {band}");
    }
}

#[test]
fn depth_precompute_keeps_rgb() {
    let mut ep = episode("rgb", 9, 7, 3, 60);
    let rgb: Vec<_> = ep.frames.iter().map(|f| f.views.clone()).collect();
    precompute_depth(&mut ep, &DepthBackendSpec::synthetic(2)).unwrap();
    assert!(ep.has_depth());
    for (f, before) in ep.frames.iter().zip(&rgb) {
        assert_eq!(&f.views, before);
    }
}
