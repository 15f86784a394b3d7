//! Synthetic expression-like sequences with exact ground-truth flow.
//!
//! Frame `t` samples the base image at `x + e(t)·d(x)`, where `d` is a
//! compactly supported deformation and `e` a raised-cosine envelope that rises
//! from 0 at frame 0 to 1 at the middle frame and falls back.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::frame_io::{Frame, FrameRate, FrameSequence};
use crate::raster::{gaussian_kernel, to_u8, Plane};

pub const MAX_AMPLITUDE: f64 = 8.0;

/// Peak of `s(1 - s²)²` on `[0, 1]`, reached at `s = 1/√5`.
const PROFILE_PEAK: f64 = 0.286_216_701_119_973_1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deform {
    None,
    /// Radial magnification around the frame centre.
    Bulge,
    /// Horizontal displacement varying with height around the frame centre.
    Shear,
}

impl std::str::FromStr for Deform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Deform::None),
            "bulge" => Ok(Deform::Bulge),
            "shear" => Ok(Deform::Shear),
            other => Err(Error::InvalidParameter(format!("unknown deformation {other:?}"))),
        }
    }
}

/// Smoothed, contrast-stretched noise; a reproducible textured test image.
pub fn random_texture(width: usize, height: usize, seed: u64, smoothness: f64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Plane {
        width,
        height,
        data: (0..width * height).map(|_| rng.random::<f64>()).collect(),
    };
    let smooth = if smoothness > 0.0 {
        noise.convolve_separable(&gaussian_kernel(smoothness))
    } else {
        noise
    };
    let (lo, hi) = smooth
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (hi - lo).max(1e-12);
    let data = smooth
        .data
        .iter()
        .map(|&v| to_u8(16.0 + 223.0 * (v - lo) / span))
        .collect();
    Frame::gray(width, height, data).expect("texture dimensions are caller-checked")
}

/// Raised-cosine weight of frame `t` in a sequence of `frames`.
pub fn envelope(t: usize, frames: usize) -> f64 {
    0.5 * (1.0 - (2.0 * std::f64::consts::PI * t as f64 / frames as f64).cos())
}

/// Unit-envelope deformation field scaled so its peak magnitude is `amplitude`.
#[derive(Debug, Clone, Copy)]
pub struct DeformField {
    pub deform: Deform,
    pub amplitude: f64,
    pub center: [f64; 2],
    pub radius: f64,
}

impl DeformField {
    pub fn new(deform: Deform, amplitude: f64, width: usize, height: usize) -> Result<Self> {
        if !(0.0..=MAX_AMPLITUDE).contains(&amplitude) {
            return Err(Error::InvalidParameter(format!(
                "amplitude {amplitude} px outside [0, {MAX_AMPLITUDE}]"
            )));
        }
        let radius = width.min(height) as f64 / 5.0;
        // steepest slope of the profile is 1 at the centre
        if deform != Deform::None && amplitude / (PROFILE_PEAK * radius) >= 0.9 {
            return Err(Error::InvalidParameter(format!(
                "amplitude {amplitude} px too large for stable warping of a {width}x{height} frame"
            )));
        }
        Ok(DeformField {
            deform,
            amplitude,
            center: [(width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0],
            radius,
        })
    }

    pub fn at(&self, x: f64, y: f64) -> [f64; 2] {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let r = dx.hypot(dy);
        let s = r / self.radius;
        if s >= 1.0 || self.amplitude == 0.0 {
            return [0.0, 0.0];
        }
        let k = self.amplitude / PROFILE_PEAK;
        let falloff = (1.0 - s * s).powi(2);
        match self.deform {
            Deform::None => [0.0, 0.0],
            Deform::Bulge => {
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let mag = -k * s * falloff;
                [mag * dx / r, mag * dy / r]
            }
            Deform::Shear => [k * (dy / self.radius) * falloff, 0.0],
        }
    }
}

/// Exact flow from the frame with envelope `e_from` to the frame with
/// envelope `e_to`, found by fixed-point inversion of the sampling map.
pub fn ground_truth_flow(field: &DeformField, width: usize, height: usize, e_from: f64, e_to: f64) -> FlowField {
    FlowField::from_fn(width, height, |px, py| {
        let (px, py) = (px as f64, py as f64);
        let d = field.at(px, py);
        let q = [px + e_from * d[0], py + e_from * d[1]];
        let mut x = [px, py];
        for _ in 0..100 {
            let d = field.at(x[0], x[1]);
            let nx = [q[0] - e_to * d[0], q[1] - e_to * d[1]];
            let done = (nx[0] - x[0]).abs() < 1e-13 && (nx[1] - x[1]).abs() < 1e-13;
            x = nx;
            if done {
                break;
            }
        }
        (x[0] - px, x[1] - py)
    })
}

/// Renders `base` under `field` at envelope weight `e`.
pub fn deform_frame(base: &Frame, field: &DeformField, e: f64) -> Frame {
    let (w, h, ch) = (base.width(), base.height(), base.channels());
    let planes: Vec<Plane> = (0..ch).map(|c| Plane::from_frame_channel(base, c)).collect();
    let mut data = vec![0u8; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            let d = field.at(x as f64, y as f64);
            let (sx, sy) = (x as f64 + e * d[0], y as f64 + e * d[1]);
            for (c, p) in planes.iter().enumerate() {
                data[(y * w + x) * ch + c] = to_u8(p.sample(sx, sy));
            }
        }
    }
    Frame::new(w, h, ch, data).expect("shape copied from base")
}

/// A `frames`-long sequence of `base` under an onset-apex-offset deformation,
/// plus the ground-truth flow of every consecutive pair.
pub fn synth_sequence(
    base: &Frame,
    deform: Deform,
    amplitude: f64,
    frames: usize,
) -> Result<(FrameSequence, Vec<FlowField>)> {
    if frames < 2 {
        return Err(Error::SequenceTooShort(frames));
    }
    let (w, h) = (base.width(), base.height());
    let field = DeformField::new(deform, amplitude, w, h)?;
    let weights: Vec<f64> = (0..frames).map(|t| envelope(t, frames)).collect();
    let seq: Vec<Frame> = weights.iter().map(|&e| deform_frame(base, &field, e)).collect();
    let flows = weights
        .windows(2)
        .map(|p| ground_truth_flow(&field, w, h, p[0], p[1]))
        .collect();
    Ok((FrameSequence::new(seq, FrameRate::default())?, flows))
}
