//! Landmark ingestion and similarity alignment of face frames.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result, ResultExt};
use crate::frame_io::{Frame, FrameSequence};

/// Points per frame in the tracker's layout.
pub const LANDMARK_COUNT: usize = 66;

const LEFT_EYE: std::ops::RangeInclusive<usize> = 36..=41;
const RIGHT_EYE: std::ops::RangeInclusive<usize> = 42..=47;

/// Inter-ocular distance of the default template, for a 256 px wide crop.
pub const TEMPLATE_IOD: f64 = 96.0;
pub const TEMPLATE_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<[f64; 2]>,
}

impl LandmarkSet {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::LandmarkCount {
                frame: 0,
                found: points.len(),
            });
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite landmark coordinate".into()));
        }
        Ok(LandmarkSet { points })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        [sx / n, sy / n]
    }

    pub fn transformed(&self, t: &SimilarityTransform) -> LandmarkSet {
        LandmarkSet {
            points: self.points.iter().map(|&p| t.apply(p)).collect(),
        }
    }

    fn mean_of(&self, range: std::ops::RangeInclusive<usize>) -> [f64; 2] {
        let n = range.clone().count() as f64;
        let (sx, sy) = self.points[range]
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        [sx / n, sy / n]
    }
}

/// `p ↦ scale · R(rotation) · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: f64,
    pub translation: [f64; 2],
}

impl SimilarityTransform {
    pub const IDENTITY: SimilarityTransform = SimilarityTransform {
        scale: 1.0,
        rotation: 0.0,
        translation: [0.0, 0.0],
    };

    pub fn new(scale: f64, rotation: f64, translation: [f64; 2]) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() || !rotation.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "similarity scale {scale}, rotation {rotation}"
            )));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite translation".into()));
        }
        Ok(SimilarityTransform {
            scale,
            rotation,
            translation,
        })
    }

    #[inline]
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        [
            self.scale * (c * p[0] - s * p[1]) + self.translation[0],
            self.scale * (s * p[0] + c * p[1]) + self.translation[1],
        ]
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let scale = 1.0 / self.scale;
        let rotation = -self.rotation;
        let (s, c) = rotation.sin_cos();
        let [tx, ty] = self.translation;
        SimilarityTransform {
            scale,
            rotation,
            translation: [-scale * (c * tx - s * ty), -scale * (s * tx + c * ty)],
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        let t = self.apply(other.translation);
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: self.rotation + other.rotation,
            translation: t,
        }
    }
}

/// Sum of squared distances between `t(src)` and `dst`.
pub fn residual(t: &SimilarityTransform, src: &LandmarkSet, dst: &LandmarkSet) -> f64 {
    src.points
        .iter()
        .zip(&dst.points)
        .map(|(&s, d)| {
            let p = t.apply(s);
            (p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2)
        })
        .sum()
}

/// Least-squares (Procrustes) similarity mapping `src` onto `template`.
pub fn estimate_similarity(src: &LandmarkSet, template: &LandmarkSet) -> Result<SimilarityTransform> {
    let ms = src.centroid();
    let mt = template.centroid();
    let (mut a, mut b, mut norm) = (0.0, 0.0, 0.0);
    for (s, t) in src.points.iter().zip(&template.points) {
        let (sx, sy) = (s[0] - ms[0], s[1] - ms[1]);
        let (tx, ty) = (t[0] - mt[0], t[1] - mt[1]);
        a += sx * tx + sy * ty;
        b += sx * ty - sy * tx;
        norm += sx * sx + sy * sy;
    }
    if norm <= 1e-12 * (1.0 + ms[0].abs() + ms[1].abs()) {
        return Err(Error::SingularConfiguration);
    }
    let (a, b) = (a / norm, b / norm);
    let scale = a.hypot(b);
    if scale <= 0.0 {
        return Err(Error::SingularConfiguration);
    }
    let rotation = b.atan2(a);
    let rotated = SimilarityTransform {
        scale,
        rotation,
        translation: [0.0, 0.0],
    }
    .apply(ms);
    SimilarityTransform::new(scale, rotation, [mt[0] - rotated[0], mt[1] - rotated[1]])
}

/// Canonical template built from a reference landmark set: eyes level,
/// inter-ocular distance `96 · out_w / 256`, centroid at the crop centre.
pub fn default_template(reference: &LandmarkSet, out_w: usize, out_h: usize) -> Result<LandmarkSet> {
    let l = reference.mean_of(LEFT_EYE);
    let r = reference.mean_of(RIGHT_EYE);
    let (dx, dy) = (r[0] - l[0], r[1] - l[1]);
    let iod = dx.hypot(dy);
    if iod <= 1e-9 {
        return Err(Error::SingularConfiguration);
    }
    let target_iod = TEMPLATE_IOD * out_w as f64 / TEMPLATE_SIZE as f64;
    let level = SimilarityTransform::new(target_iod / iod, -dy.atan2(dx), [0.0, 0.0])?;
    let moved = reference.transformed(&level);
    let c = moved.centroid();
    let shift = SimilarityTransform::new(
        1.0,
        0.0,
        [out_w as f64 / 2.0 - c[0], out_h as f64 / 2.0 - c[1]],
    )?;
    Ok(moved.transformed(&shift))
}

/// Resamples `frame` into an `out_w × out_h` window: output pixel `q` takes
/// the bilinear sample of the input at `t⁻¹(q)`, edge-clamped.
pub fn warp_crop(frame: &Frame, t: &SimilarityTransform, out_w: usize, out_h: usize) -> Result<Frame> {
    let inv = t.inverse();
    let ch = frame.channels();
    let (w, h) = (frame.width(), frame.height());
    let data = frame.data();
    let mut out = vec![0u8; out_w * out_h * ch];
    out.par_chunks_mut(out_w * ch).enumerate().for_each(|(y, row)| {
        for x in 0..out_w {
            let [sx, sy] = inv.apply([x as f64, y as f64]);
            let sx = sx.clamp(0.0, (w - 1) as f64);
            let sy = sy.clamp(0.0, (h - 1) as f64);
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let fx = sx - x0 as f64;
            let fy = sy - y0 as f64;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            for c in 0..ch {
                let g = |xx: usize, yy: usize| data[(yy * w + xx) * ch + c] as f64;
                let top = g(x0, y0) + fx * (g(x1, y0) - g(x0, y0));
                let bot = g(x0, y1) + fx * (g(x1, y1) - g(x0, y1));
                row[x * ch + c] = crate::raster::to_u8(top + fy * (bot - top));
            }
        }
    });
    Frame::new(out_w, out_h, ch, out)
}

/// Aligns every frame independently to `template` and crops it.
pub fn align_sequence(
    seq: &FrameSequence,
    lms: &[LandmarkSet],
    template: &LandmarkSet,
    out_w: usize,
    out_h: usize,
) -> Result<FrameSequence> {
    if lms.len() != seq.len() {
        return Err(Error::InvalidParameter(format!(
            "{} landmark sets for {} frames",
            lms.len(),
            seq.len()
        )));
    }
    let frames: Vec<Frame> = seq
        .frames()
        .par_iter()
        .zip(lms.par_iter())
        .enumerate()
        .map(|(i, (f, l))| {
            let t = estimate_similarity(l, template).at_frame(i)?;
            warp_crop(f, &t, out_w, out_h).at_frame(i)
        })
        .collect::<Result<_>>()?;
    FrameSequence::new(frames, seq.fps)
}

/// Parses a `frame,idx,x,y` landmark CSV into one set per frame.
pub fn parse_landmarks(path: &Path) -> Result<Vec<LandmarkSet>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_landmark_records(&mut rdr)
}

pub fn parse_landmarks_str(text: &str) -> Result<Vec<LandmarkSet>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    parse_landmark_records(&mut rdr)
}

fn parse_landmark_records<R: std::io::Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<LandmarkSet>> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    let expected = ["frame", "idx", "x", "y"];
    if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse(format!(
            "landmark header must be frame,idx,x,y (found {:?})",
            headers.iter().collect::<Vec<_>>()
        )));
    }

    let mut by_frame: BTreeMap<usize, Vec<(usize, [f64; 2])>> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str| Error::Parse(format!("row {}: non-numeric {what}", line + 2));
        let frame: usize = field(0).parse().map_err(|_| bad("frame"))?;
        let idx: usize = field(1).parse().map_err(|_| bad("idx"))?;
        let x: f64 = field(2).parse().map_err(|_| bad("x"))?;
        let y: f64 = field(3).parse().map_err(|_| bad("y"))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(bad("coordinate"));
        }
        by_frame.entry(frame).or_default().push((idx, [x, y]));
    }

    let mut sets = Vec::with_capacity(by_frame.len());
    for (expected, (frame, mut pts)) in by_frame.into_iter().enumerate() {
        if frame != expected {
            return Err(Error::NonContiguousFrames {
                expected,
                found: frame,
            });
        }
        if pts.len() != LANDMARK_COUNT {
            return Err(Error::LandmarkCount {
                frame,
                found: pts.len(),
            });
        }
        pts.sort_by_key(|&(i, _)| i);
        if pts.iter().enumerate().any(|(k, &(i, _))| k != i) {
            return Err(Error::Parse(format!(
                "frame {frame}: landmark indices must be 0..{}",
                LANDMARK_COUNT - 1
            )));
        }
        sets.push(LandmarkSet {
            points: pts.into_iter().map(|(_, p)| p).collect(),
        });
    }
    if sets.is_empty() {
        return Err(Error::EmptyInput("landmark file has no rows"));
    }
    Ok(sets)
}

pub fn write_landmarks(path: &Path, sets: &[LandmarkSet]) -> Result<()> {
    let mut text = String::from("frame,idx,x,y\n");
    for (f, s) in sets.iter().enumerate() {
        for (i, p) in s.points.iter().enumerate() {
            text.push_str(&format!("{f},{i},{},{}\n", p[0], p[1]));
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// 66 points on an 11 × 6 grid spanning the inner 60% of a frame; a stand-in
/// for tracker output on synthetic sequences.
pub fn grid_landmarks(width: usize, height: usize) -> LandmarkSet {
    let (cols, rows) = (11, 6);
    let points = (0..LANDMARK_COUNT)
        .map(|k| {
            let (i, j) = (k % cols, k / cols);
            [
                width as f64 * (0.2 + 0.6 * i as f64 / (cols - 1) as f64),
                height as f64 * (0.2 + 0.6 * j as f64 / (rows - 1) as f64),
            ]
        })
        .collect();
    LandmarkSet { points }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn face_like() -> LandmarkSet {
        // deterministic, non-degenerate scatter
        let points = (0..LANDMARK_COUNT)
            .map(|i| {
                let t = i as f64;
                [
                    100.0 + 40.0 * (t * 0.37).sin() + 0.5 * t,
                    120.0 + 35.0 * (t * 0.61).cos() - 0.3 * t,
                ]
            })
            .collect();
        LandmarkSet::new(points).unwrap()
    }

    fn csv_for(frames: &[usize], per_frame: usize) -> String {
        let mut s = String::from("frame,idx,x,y\n");
        for &f in frames {
            for i in 0..per_frame {
                s.push_str(&format!("{f},{i},{}.5,{}\n", i, i * 2));
            }
        }
        s
    }

    #[test]
    fn parses_two_frames() {
        let sets = parse_landmarks_str(&csv_for(&[0, 1], 66)).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[1].points()[3], [3.5, 6.0]);
    }

    #[test]
    fn rejects_short_frame() {
        let err = parse_landmarks_str(&csv_for(&[0], 65)).unwrap_err();
        assert!(err.to_string().contains("expected 66 points"), "{err}");
    }

    #[test]
    fn rejects_gap_in_frames() {
        let err = parse_landmarks_str(&csv_for(&[0, 2], 66)).unwrap_err();
        assert!(err.to_string().contains("non-contiguous"), "{err}");
    }

    #[test]
    fn rejects_non_numeric() {
        let text = csv_for(&[0], 66).replacen("0.5", "abc", 1);
        assert!(matches!(parse_landmarks_str(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn identity_and_translation() {
        let p = face_like();
        let t = estimate_similarity(&p, &p).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.rotation.abs() < 1e-12);
        assert!(t.translation[0].abs() < 1e-9 && t.translation[1].abs() < 1e-9);

        let shifted = p.transformed(&SimilarityTransform::new(1.0, 0.0, [5.0, -3.0]).unwrap());
        let t = estimate_similarity(&shifted, &p).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.rotation.abs() < 1e-12);
        assert!((t.translation[0] + 5.0).abs() < 1e-9);
        assert!((t.translation[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_source() {
        let p = LandmarkSet::new(vec![[4.0, 4.0]; LANDMARK_COUNT]).unwrap();
        assert!(matches!(
            estimate_similarity(&p, &face_like()),
            Err(Error::SingularConfiguration)
        ));
    }

    #[test]
    fn inverse_and_compose() {
        let t = SimilarityTransform::new(1.7, 0.4, [3.0, -8.0]).unwrap();
        let id = t.compose(&t.inverse());
        assert!((id.scale - 1.0).abs() < 1e-12);
        assert!(id.rotation.abs() < 1e-12);
        let p = [12.0, -5.0];
        let q = t.inverse().apply(t.apply(p));
        assert!((q[0] - p[0]).abs() < 1e-9 && (q[1] - p[1]).abs() < 1e-9);
    }

    #[test]
    fn warp_identity_is_noop() {
        let f = Frame::gray(20, 18, (0..360).map(|i| (i * 37 % 256) as u8).collect()).unwrap();
        assert_eq!(warp_crop(&f, &SimilarityTransform::IDENTITY, 20, 18).unwrap(), f);
    }

    #[test]
    fn warp_integer_shift_matches_direct_shift() {
        let (w, h) = (24, 20);
        let f = Frame::new(w, h, 3, (0..w * h * 3).map(|i| (i * 53 % 256) as u8).collect()).unwrap();
        let t = SimilarityTransform::new(1.0, 0.0, [3.0, 0.0]).unwrap();
        let out = warp_crop(&f, &t, w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                let sx = x.saturating_sub(3);
                for c in 0..3 {
                    assert_eq!(out.get(x, y, c), f.get(sx, y, c), "({x},{y},{c})");
                }
            }
        }
    }

    #[test]
    fn warp_constant_stays_constant() {
        let f = Frame::filled(32, 32, 1, 77).unwrap();
        let t = SimilarityTransform::new(1.3, 0.7, [-4.2, 9.9]).unwrap();
        let out = warp_crop(&f, &t, 40, 24).unwrap();
        assert!(out.data().iter().all(|&v| v == 77));
    }

    #[test]
    fn default_template_geometry() {
        let tpl = default_template(&face_like(), 256, 256).unwrap();
        let l = tpl.mean_of(LEFT_EYE);
        let r = tpl.mean_of(RIGHT_EYE);
        assert!(((r[0] - l[0]).hypot(r[1] - l[1]) - 96.0).abs() < 1e-9);
        assert!((r[1] - l[1]).abs() < 1e-9);
        let c = tpl.centroid();
        assert!((c[0] - 128.0).abs() < 1e-9 && (c[1] - 128.0).abs() < 1e-9);
    }
}
