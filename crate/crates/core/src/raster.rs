//! Floating-point single-channel rasters shared by the numerical kernels.

use rayon::prelude::*;

use crate::frame_io::Frame;

/// Row-major `f64` image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    /// Extracts channel `c` of `frame` as floating point samples.
    pub fn from_frame_channel(frame: &Frame, c: usize) -> Self {
        let ch = frame.channels();
        Plane {
            width: frame.width(),
            height: frame.height(),
            data: frame
                .data()
                .iter()
                .skip(c)
                .step_by(ch)
                .map(|&v| v as f64)
                .collect(),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear sample with edge clamping. Integer coordinates return the
    /// stored sample exactly.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let maxx = (self.width - 1) as f64;
        let maxy = (self.height - 1) as f64;
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, maxx) };
        let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, maxy) };
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let a = self.at(x0, y0);
        let b = self.at(x1, y0);
        let c = self.at(x0, y1);
        let d = self.at(x1, y1);
        let top = a + fx * (b - a);
        let bottom = c + fx * (d - c);
        top + fy * (bottom - top)
    }

    /// Separable convolution with a symmetric odd-length kernel, edge-clamped.
    pub fn convolve_separable(&self, kernel: &[f64]) -> Plane {
        debug_assert!(kernel.len() % 2 == 1);
        let r = (kernel.len() / 2) as isize;
        let (w, h) = (self.width, self.height);

        let mut tmp = vec![0.0; w * h];
        tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    acc += kv * self.at_clamped(x as isize + k as isize - r, y as isize);
                }
                *out = acc;
            }
        });
        let tmp = Plane {
            width: w,
            height: h,
            data: tmp,
        };

        let mut out = vec![0.0; w * h];
        out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, o) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    acc += kv * tmp.at_clamped(x as isize, y as isize + k as isize - r);
                }
                *o = acc;
            }
        });
        Plane {
            width: w,
            height: h,
            data: out,
        }
    }

    /// Sum over a `(2r+1)²` square window, edge-clamped.
    pub fn box_sum(&self, r: usize) -> Plane {
        self.convolve_separable(&vec![1.0; 2 * r + 1])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_u8(v)).collect()
    }
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Normalized sampled Gaussian of radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}
