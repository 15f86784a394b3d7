//! Optical strain: magnitude of the infinitesimal strain tensor of a flow
//! field, and its byte-normalized map.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{read_planes, write_planes, FlowField};
use crate::frame_io::Frame;

#[derive(Debug, Clone, PartialEq)]
pub struct StrainMap {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    /// Empty until [`normalize_strain`] (or a sequence-level variant) runs.
    pub normalized: Vec<u8>,
}

impl StrainMap {
    pub fn mean_magnitude(&self) -> f64 {
        self.magnitude.iter().sum::<f64>() / self.magnitude.len() as f64
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized.len() == self.width * self.height
    }

    /// Normalized plane as a gray frame, for PGM export.
    pub fn normalized_frame(&self) -> Result<Frame> {
        if !self.is_normalized() {
            return Err(Error::InvalidParameter("strain map is not normalized".into()));
        }
        Frame::gray(self.width, self.height, self.normalized.clone())
    }

    /// Raw magnitudes as an `SVSM` f32 dump.
    pub fn save_raw(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        write_planes(&mut buf, b"SVSM", self.width, self.height, &[&self.magnitude])
            .map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_raw(bytes: &[u8]) -> Result<StrainMap> {
        let (width, height, mut planes) = read_planes(bytes, b"SVSM", 1)?;
        Ok(StrainMap {
            width,
            height,
            magnitude: planes.pop().unwrap(),
            normalized: Vec::new(),
        })
    }
}

/// Spatial partials of a flow field.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGradients {
    pub du_dx: Vec<f64>,
    pub du_dy: Vec<f64>,
    pub dv_dx: Vec<f64>,
    pub dv_dy: Vec<f64>,
}

#[inline]
fn diff(plane: &[f64], w: usize, h: usize, x: usize, y: usize, along_x: bool) -> f64 {
    let at = |xx: usize, yy: usize| plane[yy * w + xx];
    let (len, pos) = if along_x { (w, x) } else { (h, y) };
    if len == 1 {
        return 0.0;
    }
    let (lo, hi, step) = if pos == 0 {
        (0, 1, 1.0)
    } else if pos == len - 1 {
        (len - 2, len - 1, 1.0)
    } else {
        (pos - 1, pos + 1, 2.0)
    };
    if along_x {
        (at(hi, y) - at(lo, y)) / step
    } else {
        (at(x, hi) - at(x, lo)) / step
    }
}

/// Central differences inside, forward/backward differences on the border.
pub fn flow_gradients(f: &FlowField) -> FlowGradients {
    let (w, h) = (f.width, f.height);
    let grad = |plane: &[f64], along_x: bool| -> Vec<f64> {
        (0..w * h)
            .into_par_iter()
            .map(|i| diff(plane, w, h, i % w, i / w, along_x))
            .collect()
    };
    FlowGradients {
        du_dx: grad(&f.u, true),
        du_dy: grad(&f.u, false),
        dv_dx: grad(&f.v, true),
        dv_dy: grad(&f.v, false),
    }
}

/// Frobenius norm of `ε = ½(∇w + ∇wᵀ)` at every pixel.
pub fn strain_magnitude(f: &FlowField) -> StrainMap {
    let g = flow_gradients(f);
    let magnitude = (0..f.width * f.height)
        .into_par_iter()
        .map(|i| {
            let exx = g.du_dx[i];
            let eyy = g.dv_dy[i];
            let exy = 0.5 * (g.du_dy[i] + g.dv_dx[i]);
            (exx * exx + eyy * eyy + 2.0 * exy * exy).sqrt()
        })
        .collect();
    StrainMap {
        width: f.width,
        height: f.height,
        magnitude,
        normalized: Vec::new(),
    }
}

fn scale_bytes(magnitude: &[f64], lo: f64, hi: f64) -> Vec<u8> {
    if !(hi > lo) {
        return vec![0; magnitude.len()];
    }
    let span = hi - lo;
    magnitude
        .iter()
        .map(|&m| (255.0 * (m - lo) / span).round().clamp(0.0, 255.0) as u8)
        .collect()
}

fn range(m: &[f64]) -> (f64, f64) {
    m.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Per-map min-max scaling to 0..=255; a flat map normalizes to all zeros.
pub fn normalize_strain(mut s: StrainMap) -> StrainMap {
    let (lo, hi) = range(&s.magnitude);
    s.normalized = scale_bytes(&s.magnitude, lo, hi);
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    PerFrame,
    /// One min/max over the whole sequence, for temporally comparable maps.
    PerSequence,
}

/// Strain magnitude plus normalization for every flow field, in order.
pub fn strain_sequence(flows: &[FlowField], mode: Normalization) -> Result<Vec<StrainMap>> {
    if flows.is_empty() {
        return Err(Error::EmptyInput("strain_sequence needs at least one flow field"));
    }
    let raw: Vec<StrainMap> = flows.par_iter().map(strain_magnitude).collect();
    Ok(match mode {
        Normalization::PerFrame => raw.into_iter().map(normalize_strain).collect(),
        Normalization::PerSequence => {
            let (lo, hi) = raw
                .iter()
                .map(|s| range(&s.magnitude))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)));
            raw.into_iter()
                .map(|mut s| {
                    s.normalized = scale_bytes(&s.magnitude, lo, hi);
                    s
                })
                .collect()
        }
    })
}
