use super::DepthMap;
use crate::imagecore::{luminance, RgbImage};

/// Relative range below which a blurred map is treated as constant.
const FLAT_EPS: f64 = 1e-12;

/// Deterministic stand-in for a monocular depth estimator.
///
/// Luminance is divided by its image mean, box-blurred over a
/// `(2r+1)×(2r+1)` window clipped at the borders, then min-max normalized.
/// A global gain on the input cancels in the mean division, so the output
/// is unchanged by exposure as long as nothing clips. Constant images map to
/// all zeros.
pub fn synthetic_depth_oracle(img: &RgbImage, blur_radius: usize) -> DepthMap {
    let (w, h) = img.dims();
    if img.is_empty() {
        return DepthMap::zeros(w, h);
    }
    let lum: Vec<f64> = img.pixels().map(|p| luminance([p[0], p[1], p[2]])).collect();
    let first = lum[0];
    let mean = lum.iter().sum::<f64>() / lum.len() as f64;
    if mean <= 0.0 || lum.iter().all(|&v| v == first) {
        return DepthMap::zeros(w, h);
    }
    let norm: Vec<f64> = lum.iter().map(|v| v / mean).collect();
    let blurred = box_blur(&norm, w, h, blur_radius);
    let (lo, hi) = blurred
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN counts as flat
    if !(range > FLAT_EPS * hi.abs().max(1.0)) {
        return DepthMap::zeros(w, h);
    }
    let data = blurred
        .iter()
        .map(|v| (((v - lo) / range) as f32).clamp(0.0, 1.0))
        .collect();
    DepthMap { width: w, height: h, data }
}

/// Box mean over the in-bounds part of each window, via a summed-area table.
fn box_blur(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    if r == 0 {
        return src.to_vec();
    }
    let stride = w + 1;
    let mut sat = vec![0.0f64; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += src[y * w + x];
            sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r + 1).min(w);
            let s = sat[y1 * stride + x1] - sat[y0 * stride + x1] - sat[y1 * stride + x0] + sat[y0 * stride + x0];
            out.push(s / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruption::{simulate_exposure, ExposureLevel};
    use approx::assert_abs_diff_eq;

    /// Direct window average, independent of the summed-area table.
    fn naive_blur(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (mut s, mut n) = (0.0, 0.0);
                for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
                    for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                        s += src[yy * w + xx];
                        n += 1.0;
                    }
                }
                out[y * w + x] = s / n;
            }
        }
        out
    }

    #[test]
    fn summed_area_blur_matches_naive() {
        let (w, h) = (9, 6);
        let src: Vec<f64> = (0..w * h).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        for r in 0..4 {
            let fast = box_blur(&src, w, h, r);
            let slow = naive_blur(&src, w, h, r);
            for (a, b) in fast.iter().zip(&slow) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_image_is_all_zero() {
        let d = synthetic_depth_oracle(&RgbImage::filled(8, 5, [0.3, 0.6, 0.2]), 2);
        assert_eq!(d.dims(), (8, 5));
        assert!(d.data().iter().all(|&v| v == 0.0));
        let black = synthetic_depth_oracle(&RgbImage::filled(3, 3, [0.0; 3]), 1);
        assert!(black.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_spans_unit_interval() {
        let img = RgbImage::from_fn(10, 8, |x, y| [x as f32 / 10.0, y as f32 / 8.0, 0.4]);
        let d = synthetic_depth_oracle(&img, 1);
        assert_eq!(d.dims(), (10, 8));
        let lo = d.data().iter().cloned().fold(f32::INFINITY, f32::min);
        let hi = d.data().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn exposure_invariant_without_clipping() {
        let img = RgbImage::from_fn(12, 9, |x, y| {
            [0.1 + 0.05 * x as f32, 0.2 + 0.04 * y as f32, 0.3 + 0.01 * (x * y % 7) as f32]
        });
        let reference = ExposureLevel::new(120).unwrap();
        let base = synthetic_depth_oracle(&img, 1);
        for level in [10, 40, 100, 140] {
            let exposed = simulate_exposure(&img, ExposureLevel::new(level).unwrap(), reference);
            let d = synthetic_depth_oracle(&exposed, 1);
            assert!(d.max_abs_diff(&base).unwrap() <= 1e-6, "level {level}");
        }
    }
}
