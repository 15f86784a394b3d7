//! Dense pyramidal Lucas-Kanade optical flow.
//!
//! Every pixel solves the regularized 2×2 normal equations
//! `(G + εI) d = -b` over a square window, where `G` is the structure tensor
//! of the previous frame and `b` correlates its gradients with the temporal
//! residual. Levels are processed coarse to fine; at each level `next` is
//! warped toward `prev` with the current estimate and the update is
//! re-solved `iterations_per_level` times.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame_io::{Frame, MIN_DIM};
use crate::raster::Plane;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    pub window_radius: usize,
    pub iterations_per_level: usize,
    pub regularization_eps: f64,
    /// Per-component clamp on |u| and |v|, pixels/frame.
    pub max_displacement: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            pyramid_levels: 3,
            window_radius: 7,
            iterations_per_level: 3,
            regularization_eps: 1e-4,
            max_displacement: 16.0,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels < 1 {
            return Err(Error::InvalidParameter("pyramid_levels must be >= 1".into()));
        }
        if self.window_radius < 1 {
            return Err(Error::InvalidParameter("window_radius must be >= 1".into()));
        }
        if !(self.regularization_eps >= 0.0) || !self.regularization_eps.is_finite() {
            return Err(Error::InvalidParameter("regularization_eps must be >= 0".into()));
        }
        if !(self.max_displacement > 0.0) {
            return Err(Error::InvalidParameter("max_displacement must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-pixel displacement `(u, v)` from one frame to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> (f64, f64)) -> Self {
        let mut out = FlowField::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(x, y);
                out.u[y * width + x] = u;
                out.v[y * width + x] = v;
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Endpoint error against `other` at every pixel at least `margin` px
    /// from the border.
    pub fn endpoint_errors(&self, other: &FlowField, margin: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for y in margin..self.height.saturating_sub(margin) {
            for x in margin..self.width.saturating_sub(margin) {
                let (a, b) = self.at(x, y);
                let (c, d) = other.at(x, y);
                out.push((a - c).hypot(b - d));
            }
        }
        out
    }

    fn u_plane(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.u.clone(),
        }
    }

    fn v_plane(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.v.clone(),
        }
    }

    /// Binary dump: `SVFL`, u32 width, u32 height, f32 u-plane, f32 v-plane,
    /// all little-endian.
    pub fn write_dump(&self, out: &mut impl Write) -> std::io::Result<()> {
        write_planes(out, b"SVFL", self.width, self.height, &[&self.u, &self.v])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_dump(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_dump(bytes: &[u8]) -> Result<FlowField> {
        let (width, height, mut planes) = read_planes(bytes, b"SVFL", 2)?;
        let v = planes.pop().unwrap();
        let u = planes.pop().unwrap();
        Ok(FlowField { width, height, u, v })
    }
}

pub(crate) fn write_planes(
    out: &mut impl Write,
    magic: &[u8; 4],
    width: usize,
    height: usize,
    planes: &[&[f64]],
) -> std::io::Result<()> {
    out.write_all(magic)?;
    out.write_all(&(width as u32).to_le_bytes())?;
    out.write_all(&(height as u32).to_le_bytes())?;
    for p in planes {
        for &v in p.iter() {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub(crate) fn read_planes(
    bytes: &[u8],
    magic: &[u8; 4],
    count: usize,
) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    if bytes.len() < 12 || &bytes[..4] != magic {
        return Err(Error::Parse(format!(
            "missing {} magic",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n = width * height;
    if bytes.len() != 12 + 4 * n * count {
        return Err(Error::Parse("plane dump has the wrong length".into()));
    }
    let planes = (0..count)
        .map(|k| {
            bytes[12 + 4 * n * k..12 + 4 * n * (k + 1)]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        })
        .collect();
    Ok((width, height, planes))
}

const PYRAMID_TAPS: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

fn check_levels(width: usize, height: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::InvalidParameter("pyramid_levels must be >= 1".into()));
    }
    let need = MIN_DIM << (levels - 1).min(32);
    if width < need || height < need {
        return Err(Error::TooManyLevels {
            levels,
            width,
            height,
        });
    }
    Ok(())
}

fn downsample(p: &Plane) -> Plane {
    let blurred = p.convolve_separable(&PYRAMID_TAPS);
    let (w, h) = (p.width.div_ceil(2), p.height.div_ceil(2));
    Plane::from_fn(w, h, |x, y| blurred.at(2 * x, 2 * y))
}

fn plane_pyramid(base: Plane, levels: usize) -> Vec<Plane> {
    let mut out = vec![base];
    for _ in 1..levels {
        let next = downsample(out.last().unwrap());
        out.push(next);
    }
    out
}

/// Gaussian pyramid: level 0 is the input, each further level is the previous
/// one smoothed with a 5-tap binomial kernel and decimated by two.
pub fn build_pyramid(frame: &Frame, levels: usize) -> Result<Vec<Frame>> {
    if frame.channels() != 1 {
        return Err(Error::InvalidFrame("pyramid needs a gray frame".into()));
    }
    check_levels(frame.width(), frame.height(), levels)?;
    plane_pyramid(Plane::from_frame_channel(frame, 0), levels)
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            if i == 0 {
                Ok(frame.clone())
            } else {
                Frame::gray(p.width, p.height, p.to_bytes())
            }
        })
        .collect()
}

/// Central differences, one-sided at the border.
fn gradients(p: &Plane) -> (Plane, Plane) {
    let (w, h) = (p.width, p.height);
    let gx = Plane::from_fn(w, h, |x, y| {
        let l = x.saturating_sub(1);
        let r = (x + 1).min(w - 1);
        (p.at(r, y) - p.at(l, y)) / (r - l) as f64
    });
    let gy = Plane::from_fn(w, h, |x, y| {
        let t = y.saturating_sub(1);
        let b = (y + 1).min(h - 1);
        (p.at(x, b) - p.at(x, t)) / (b - t) as f64
    });
    (gx, gy)
}

fn warp_plane(p: &Plane, u: &Plane, v: &Plane) -> Plane {
    let w = p.width;
    let mut data = vec![0.0; w * p.height];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = p.sample(x as f64 + u.at(x, y), y as f64 + v.at(x, y));
        }
    });
    Plane {
        width: w,
        height: p.height,
        data,
    }
}

fn upsample_flow(u: &Plane, v: &Plane, width: usize, height: usize) -> (Plane, Plane) {
    let up = |p: &Plane| Plane::from_fn(width, height, |x, y| 2.0 * p.sample(x as f64 / 2.0, y as f64 / 2.0));
    (up(u), up(v))
}

fn product(a: &Plane, b: &Plane) -> Plane {
    Plane {
        width: a.width,
        height: a.height,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    }
}

/// Dense flow from `prev` to `next`: `prev(x) ≈ next(x + flow(x))`.
pub fn compute_flow(prev: &Frame, next: &Frame, p: &FlowParams) -> Result<FlowField> {
    p.validate()?;
    if prev.channels() != 1 || next.channels() != 1 {
        return Err(Error::InvalidFrame("flow needs gray frames".into()));
    }
    prev.check_same_shape(next)?;
    check_levels(prev.width(), prev.height(), p.pyramid_levels)?;

    let scale = |f: &Frame| {
        let mut pl = Plane::from_frame_channel(f, 0);
        pl.data.iter_mut().for_each(|v| *v /= 255.0);
        pl
    };
    let prev_pyr = plane_pyramid(scale(prev), p.pyramid_levels);
    let next_pyr = plane_pyramid(scale(next), p.pyramid_levels);

    let mut flow: Option<(Plane, Plane)> = None;
    for level in (0..p.pyramid_levels).rev() {
        let (pl, nl) = (&prev_pyr[level], &next_pyr[level]);
        let (w, h) = (pl.width, pl.height);
        let (mut u, mut v) = match flow.take() {
            None => (Plane::zeros(w, h), Plane::zeros(w, h)),
            Some((u, v)) => upsample_flow(&u, &v, w, h),
        };
        let limit = p.max_displacement / (1u64 << level) as f64;
        refine_level(pl, nl, &mut u, &mut v, p, limit);
        flow = Some((u, v));
    }
    let (u, v) = flow.unwrap();
    Ok(FlowField {
        width: u.width,
        height: u.height,
        u: u.data,
        v: v.data,
    })
}

/// Iterative Lucas-Kanade at one pyramid level. Each pixel refines its own
/// displacement `d`, comparing `next(q + d)` with `prev(q)` over its window,
/// so neighbouring estimates never feed into each other.
fn refine_level(prev: &Plane, next: &Plane, u: &mut Plane, v: &mut Plane, p: &FlowParams, limit: f64) {
    let r = p.window_radius;
    let eps = p.regularization_eps;
    let (gx, gy) = gradients(prev);
    let gxx = product(&gx, &gx).box_sum(r);
    let gxy = product(&gx, &gy).box_sum(r);
    let gyy = product(&gy, &gy).box_sum(r);

    let (w, h) = (prev.width, prev.height);
    let r = r as isize;
    u.data
        .par_chunks_mut(w)
        .zip(v.data.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (urow, vrow))| {
            let rows: Vec<usize> = (-r..=r).map(|k| clamp_index(y as isize + k, h)).collect();
            for x in 0..w {
                let i = y * w + x;
                let a = gxx.data[i] + eps;
                let b = gxy.data[i];
                let d = gyy.data[i] + eps;
                let det = a * d - b * b;
                if !(det > 0.0) || !det.is_finite() {
                    continue;
                }
                let cols: Vec<usize> = (-r..=r).map(|k| clamp_index(x as isize + k, w)).collect();
                let (mut du, mut dv) = (urow[x], vrow[x]);
                for _ in 0..p.iterations_per_level {
                    let (bx, by) = window_mismatch(prev, next, &gx, &gy, &cols, &rows, du, dv);
                    let sx = -(d * bx - b * by) / det;
                    let sy = -(a * by - b * bx) / det;
                    if !sx.is_finite() || !sy.is_finite() {
                        break;
                    }
                    du = (du + sx).clamp(-limit, limit);
                    dv = (dv + sy).clamp(-limit, limit);
                }
                urow[x] = du;
                vrow[x] = dv;
            }
        });
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// `Σ ∇prev(q) · (next(q + d) − prev(q))` over the window `cols × rows`.
/// All samples share one fractional offset, so the bilinear weights are
/// computed once.
#[allow(clippy::too_many_arguments)]
fn window_mismatch(
    prev: &Plane,
    next: &Plane,
    gx: &Plane,
    gy: &Plane,
    cols: &[usize],
    rows: &[usize],
    du: f64,
    dv: f64,
) -> (f64, f64) {
    let (w, h) = (next.width, next.height);
    let (fx, fy) = (du.floor(), dv.floor());
    let (ax, ay) = (du - fx, dv - fy);
    let (ox, oy) = (fx as isize, fy as isize);
    let (mut bx, mut by) = (0.0, 0.0);
    for &qy in rows {
        let y0 = clamp_index(qy as isize + oy, h) * w;
        let y1 = clamp_index(qy as isize + oy + 1, h) * w;
        for &qx in cols {
            let x0 = clamp_index(qx as isize + ox, w);
            let x1 = clamp_index(qx as isize + ox + 1, w);
            let top = next.data[y0 + x0] + ax * (next.data[y0 + x1] - next.data[y0 + x0]);
            let bottom = next.data[y1 + x0] + ax * (next.data[y1 + x1] - next.data[y1 + x0]);
            let q = qy * w + qx;
            let it = top + ay * (bottom - top) - prev.data[q];
            bx += gx.data[q] * it;
            by += gy.data[q] * it;
        }
    }
    (bx, by)
}

/// `out(x, y) = frame(x + u, y + v)`, bilinear and edge-clamped.
pub fn warp_by_flow(frame: &Frame, f: &FlowField) -> Result<Frame> {
    if frame.width() != f.width || frame.height() != f.height {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", f.width, f.height),
            found: format!("{}x{}", frame.width(), frame.height()),
        });
    }
    let ch = frame.channels();
    let (u, v) = (f.u_plane(), f.v_plane());
    let planes: Vec<Plane> = (0..ch)
        .map(|c| warp_plane(&Plane::from_frame_channel(frame, c), &u, &v))
        .collect();
    let n = f.width * f.height;
    let mut data = vec![0u8; n * ch];
    for (c, p) in planes.iter().enumerate() {
        for (i, &val) in p.data.iter().enumerate() {
            data[i * ch + c] = crate::raster::to_u8(val);
        }
    }
    Frame::new(f.width, f.height, ch, data)
}
