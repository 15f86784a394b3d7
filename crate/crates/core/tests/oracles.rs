//! Library results checked against direct, deliberately naive
//! reimplementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strainveil_core::align::{estimate_similarity, residual, LANDMARK_COUNT};
use strainveil_core::eval::random_texture;
use strainveil_core::flow::{compute_flow, warp_by_flow};
use strainveil_core::raster::Plane;
use strainveil_core::strain::flow_gradients;
use strainveil_core::suppress::{median_smooth_edges, threshold_mask};
use strainveil_core::{BinaryMask, FlowField, FlowParams, Frame, LandmarkSet, SimilarityTransform, StrainMap};

fn face_points() -> LandmarkSet {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    LandmarkSet::new(
        (0..LANDMARK_COUNT)
            .map(|_| [rng.random_range(60.0..200.0), rng.random_range(40.0..220.0)])
            .collect(),
    )
    .unwrap()
}

/// Minimizes the residual over (scale, rotation) by nested grid refinement;
/// translation is the centroid difference for each candidate.
fn grid_search(src: &LandmarkSet, dst: &LandmarkSet) -> (f64, f64) {
    let cost = |s: f64, r: f64| {
        let base = SimilarityTransform::new(s, r, [0.0, 0.0]).unwrap();
        let (cs, cd) = (base.apply(src.centroid()), dst.centroid());
        let t = SimilarityTransform::new(s, r, [cd[0] - cs[0], cd[1] - cs[1]]).unwrap();
        residual(&t, src, dst)
    };
    let (mut s0, mut r0) = (1.0, 0.0);
    let (mut ds, mut dr) = (1.0, 3.0);
    for _ in 0..60 {
        let mut best = (f64::INFINITY, s0, r0);
        for i in -10..=10 {
            for j in -10..=10 {
                let s = s0 + ds * i as f64 / 10.0;
                let r = r0 + dr * j as f64 / 10.0;
                if s > 0.0 {
                    let c = cost(s, r);
                    if c < best.0 {
                        best = (c, s, r);
                    }
                }
            }
        }
        (s0, r0) = (best.1, best.2);
        ds *= 0.5;
        dr *= 0.5;
    }
    (s0, r0)
}

#[test]
fn procrustes_matches_grid_search() {
    let template = face_points();
    let c = template.centroid();
    // rotate 30 degrees about the centroid and scale by 1.25
    let about = SimilarityTransform::new(1.0, 0.0, c)
        .unwrap()
        .compose(&SimilarityTransform::new(1.25, 30f64.to_radians(), [0.0, 0.0]).unwrap())
        .compose(&SimilarityTransform::new(1.0, 0.0, [-c[0], -c[1]]).unwrap());
    let src = template.transformed(&about);
    let t = estimate_similarity(&src, &template).unwrap();
    assert!((t.scale - 0.8).abs() < 1e-9, "{}", t.scale);
    assert!((t.rotation.to_degrees() + 30.0).abs() < 1e-9, "{}", t.rotation.to_degrees());

    let (s, r) = grid_search(&src, &template);
    assert!((s - t.scale).abs() < 1e-6, "{s} vs {}", t.scale);
    assert!((r - t.rotation).abs() < 1e-6, "{r} vs {}", t.rotation);
}

#[test]
fn gradient_stencil_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (w, h) = (9, 7);
    let f = FlowField {
        width: w,
        height: h,
        u: (0..w * h).map(|_| rng.random_range(-3.0..3.0)).collect(),
        v: (0..w * h).map(|i| (i as f64 * 0.37).sin()).collect(),
    };
    let g = flow_gradients(&f);
    let at = |p: &[f64], x: usize, y: usize| p[y * w + x];
    for y in 0..h {
        for x in 0..w {
            let dx = |p: &[f64]| match x {
                0 => at(p, 1, y) - at(p, 0, y),
                _ if x == w - 1 => at(p, w - 1, y) - at(p, w - 2, y),
                _ => (at(p, x + 1, y) - at(p, x - 1, y)) / 2.0,
            };
            let dy = |p: &[f64]| match y {
                0 => at(p, x, 1) - at(p, x, 0),
                _ if y == h - 1 => at(p, x, h - 1) - at(p, x, h - 2),
                _ => (at(p, x, y + 1) - at(p, x, y - 1)) / 2.0,
            };
            let i = y * w + x;
            assert_eq!(g.du_dx[i], dx(&f.u));
            assert_eq!(g.du_dy[i], dy(&f.u));
            assert_eq!(g.dv_dx[i], dx(&f.v));
            assert_eq!(g.dv_dy[i], dy(&f.v));
        }
    }
}

#[test]
fn ramp_threshold_matches_sorted_percentile() {
    let (w, h) = (64, 64);
    let normalized: Vec<u8> = (0..w * h).map(|i| ((i * 256) / (w * h)) as u8).collect();
    let s = StrainMap {
        width: w,
        height: h,
        magnitude: normalized.iter().map(|&v| v as f64).collect(),
        normalized: normalized.clone(),
    };
    for pct in [0.0, 10.0, 37.5, 90.0, 100.0] {
        let mut sorted = normalized.clone();
        sorted.sort_unstable();
        let rank = ((pct / 100.0 * sorted.len() as f64).ceil() as usize).max(1);
        let t = sorted[rank - 1];
        let expect = normalized.iter().filter(|&&v| v > t).count();
        let m = threshold_mask(&s, pct, 9).unwrap();
        assert_eq!(m.count(), expect, "percentile {pct}");
    }
    let m = threshold_mask(&s, 10.0, 9).unwrap();
    let frac = m.count() as f64 / (w * h) as f64;
    assert!((frac - 0.9).abs() < 0.01, "{frac}");
}

#[test]
fn salt_and_pepper_in_band_is_removed() {
    let (w, h) = (24, 24);
    let mut data = vec![100u8; w * h];
    let mut band = vec![false; w * h];
    for y in 8..16 {
        band[y * w + 8] = true;
        band[y * w + 15] = true;
    }
    for (k, i) in band.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).enumerate() {
        data[i] = if k % 2 == 0 { 0 } else { 255 };
    }
    let noisy = Frame::gray(w, h, data).unwrap();
    let out = median_smooth_edges(&noisy, &BinaryMask::new(w, h, band.clone()).unwrap(), 5).unwrap();
    for (i, (&v, &b)) in out.data().iter().zip(&band).enumerate() {
        assert_eq!(v, 100, "pixel {i} band {b}");
    }
}

fn smooth_random_flow(w: usize, h: usize, seed: u64) -> FlowField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                rng.random_range(0.4..1.2),
                rng.random_range(0.01..0.04),
                rng.random_range(0.01..0.04),
                rng.random_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    FlowField::from_fn(w, h, |x, y| {
        let s: f64 = waves
            .iter()
            .map(|[a, fx, fy, ph]| a * (fx * x as f64 + fy * y as f64 + ph).sin())
            .sum();
        (s, 0.6 * s.cos())
    })
}

fn mean_residual(a: &Frame, b: &Frame) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum::<f64>()
        / a.data().len() as f64
}

#[test]
fn more_iterations_lower_photometric_residual() {
    let (w, h) = (96, 96);
    let next = random_texture(w, h, 12, 2.5);
    let truth = smooth_random_flow(w, h, 3);
    // prev(x) = next(x + truth(x))
    let prev = warp_by_flow(&next, &truth).unwrap();
    let mut last = f64::INFINITY;
    for it in 1..=3 {
        let p = FlowParams {
            iterations_per_level: it,
            ..FlowParams::default()
        };
        let est = compute_flow(&prev, &next, &p).unwrap();
        let r = mean_residual(&warp_by_flow(&next, &est).unwrap(), &prev);
        assert!(r <= last + 1e-12, "iterations {it}: residual {r} after {last}");
        last = r;
    }
    let identity = mean_residual(&next, &prev);
    assert!(last < 0.5 * identity, "{last} vs {identity}");
}

#[test]
fn gaussian_blur_matches_direct_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = Plane {
        width: 20,
        height: 17,
        data: (0..20 * 17).map(|_| rng.random_range(0.0..1.0)).collect(),
    };
    let k = strainveil_core::raster::gaussian_kernel(1.3);
    let r = (k.len() / 2) as isize;
    let out = p.convolve_separable(&k);
    for y in 0..17isize {
        for x in 0..20isize {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    acc += k[(dy + r) as usize] * k[(dx + r) as usize] * p.at_clamped(x + dx, y + dy);
                }
            }
            assert!((acc - out.at(x as usize, y as usize)).abs() < 1e-12);
        }
    }
}
