use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::frame_io::Frame;
use crate::strain::StrainMap;

/// Per-pixel replace (`true`) / keep (`false`) grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} bits", width * height),
                found: format!("{} bits", bits.len()),
            });
        }
        Ok(BinaryMask { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_frame(&self) -> Result<Frame> {
        Frame::gray(
            self.width,
            self.height,
            self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        )
    }

    fn check_fits(&self, frame: &Frame) -> Result<()> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                found: format!("{}x{}", frame.width(), frame.height()),
            });
        }
        Ok(())
    }
}

/// Smallest value `t` such that at least `percentile`% of `values` are `≤ t`.
pub fn nearest_rank(values: &[u8], percentile: f64) -> u8 {
    let mut hist = [0usize; 256];
    for &v in values {
        hist[v as usize] += 1;
    }
    let rank = ((percentile / 100.0) * values.len() as f64).ceil().max(1.0) as usize;
    let mut seen = 0;
    for (v, &c) in hist.iter().enumerate() {
        seen += c;
        if seen >= rank {
            return v as u8;
        }
    }
    255
}

/// Marks pixels whose normalized strain exceeds the nearest-rank
/// `percentile`, then clears 4-connected blobs smaller than `min_blob`.
pub fn threshold_mask(s: &StrainMap, percentile: f64, min_blob: usize) -> Result<BinaryMask> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::InvalidParameter(format!(
            "threshold percentile {percentile} outside [0, 100]"
        )));
    }
    if !s.is_normalized() {
        return Err(Error::InvalidParameter("strain map is not normalized".into()));
    }
    let t = nearest_rank(&s.normalized, percentile);
    let mut m = BinaryMask {
        width: s.width,
        height: s.height,
        bits: s.normalized.iter().map(|&v| v > t).collect(),
    };
    despeckle(&mut m, min_blob);
    Ok(m)
}

/// Clears 4-connected components with fewer than `min_blob` pixels.
pub fn despeckle(m: &mut BinaryMask, min_blob: usize) {
    if min_blob <= 1 {
        return;
    }
    let (w, h) = (m.width, m.height);
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if !m.bits[start] || seen[start] {
            continue;
        }
        component.clear();
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            component.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if m.bits[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if component.len() < min_blob {
            for &i in &component {
                m.bits[i] = false;
            }
        }
    }
}

/// One separable pass of a square structuring element. Out-of-frame pixels
/// count as `false`, so erosion eats in from the frame border.
fn sweep(m: &BinaryMask, r: usize, horizontal: bool, dilate: bool) -> BinaryMask {
    let (w, h) = (m.width, m.height);
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let (pos, len) = if horizontal { (x, w) } else { (y, h) };
            let fits = pos >= r && pos + r < len;
            let lo = pos.saturating_sub(r);
            let hi = (pos + r).min(len - 1);
            let at = |k: usize| if horizontal { m.get(k, y) } else { m.get(x, k) };
            out[y * w + x] = if dilate {
                (lo..=hi).any(at)
            } else {
                fits && (lo..=hi).all(at)
            };
        }
    }
    BinaryMask {
        width: w,
        height: h,
        bits: out,
    }
}

pub fn dilate(m: &BinaryMask, r: usize) -> BinaryMask {
    sweep(&sweep(m, r, true, true), r, false, true)
}

pub fn erode(m: &BinaryMask, r: usize) -> BinaryMask {
    sweep(&sweep(m, r, true, false), r, false, false)
}

/// Boundary ribbon of the mask: `dilate(m, band) ∧ ¬erode(m, band)`.
pub fn mask_edge_band(m: &BinaryMask, band: usize) -> Result<BinaryMask> {
    if band < 1 {
        return Err(Error::InvalidParameter("edge band must be >= 1".into()));
    }
    let d = dilate(m, band);
    let e = erode(m, band);
    Ok(BinaryMask {
        width: m.width,
        height: m.height,
        bits: d.bits.iter().zip(&e.bits).map(|(&a, &b)| a && !b).collect(),
    })
}

/// Copies every channel of `reference` into `current` wherever the mask is set.
pub fn replace_pixels(current: &Frame, reference: &Frame, m: &BinaryMask) -> Result<Frame> {
    current.check_same_shape(reference)?;
    m.check_fits(current)?;
    let ch = current.channels();
    let mut data = current.data().to_vec();
    for (i, _) in m.bits.iter().enumerate().filter(|(_, &b)| b) {
        data[i * ch..(i + 1) * ch].copy_from_slice(&reference.data()[i * ch..(i + 1) * ch]);
    }
    Frame::new(current.width(), current.height(), ch, data)
}

/// Replaces pixels inside `band` with the per-channel median of their
/// `kernel × kernel` neighbourhood in the unsmoothed frame.
pub fn median_smooth_edges(frame: &Frame, band: &BinaryMask, kernel: usize) -> Result<Frame> {
    if kernel < 3 || kernel.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "median kernel must be odd and >= 3 (got {kernel})"
        )));
    }
    band.check_fits(frame)?;
    let (w, h, ch) = (frame.width(), frame.height(), frame.channels());
    let r = (kernel / 2) as isize;
    let src = frame.data();
    let mut data = src.to_vec();
    let mut hist = [0u16; 256];
    let half = (kernel * kernel / 2) as u16;
    for y in 0..h {
        for x in 0..w {
            if !band.get(x, y) {
                continue;
            }
            for c in 0..ch {
                hist.fill(0);
                for dy in -r..=r {
                    let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    for dx in -r..=r {
                        let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        hist[src[(yy * w + xx) * ch + c] as usize] += 1;
                    }
                }
                let mut acc = 0u16;
                for (v, &n) in hist.iter().enumerate() {
                    acc += n;
                    if acc > half {
                        data[(y * w + x) * ch + c] = v as u8;
                        break;
                    }
                }
            }
        }
    }
    Frame::new(w, h, ch, data)
}

/// Full-frame separable Gaussian blur, radius `ceil(3σ)`, edge-clamped.
/// `sigma == 0` is the identity.
pub fn smooth_face(frame: &Frame, sigma: f64) -> Result<Frame> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("blur sigma {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(frame.clone());
    }
    let kernel = crate::raster::gaussian_kernel(sigma);
    let ch = frame.channels();
    let mut data = vec![0u8; frame.data().len()];
    for c in 0..ch {
        let blurred = crate::raster::Plane::from_frame_channel(frame, c).convolve_separable(&kernel);
        for (i, &v) in blurred.data.iter().enumerate() {
            data[i * ch + c] = crate::raster::to_u8(v);
        }
    }
    Frame::new(frame.width(), frame.height(), ch, data)
}
