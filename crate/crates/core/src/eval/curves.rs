//! CSV and standalone SVG output for intensity curves and ROC curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::intensity::IntensitySeries;
use crate::eval::roc::Roc;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 48.0;

pub const BEFORE_COLOR: &str = "green";
pub const AFTER_COLOR: &str = "blue";

pub fn curves_csv(before: &IntensitySeries, after: &IntensitySeries) -> Result<String> {
    if before.len() != after.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} frames", before.len()),
            found: format!("{} frames", after.len()),
        });
    }
    let mut out = String::from("frame,before,after\n");
    for ((f, b), a) in before.frames.iter().zip(&before.scores).zip(&after.scores) {
        let _ = writeln!(out, "{f},{b},{a}");
    }
    Ok(out)
}

fn polyline(points: impl Iterator<Item = (f64, f64)>, color: &str) -> String {
    let pts: Vec<String> = points.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        pts.join(" ")
    )
}

fn frame_svg(body: &str, title: &str, x_label: &str, y_label: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{x_label}</text>\n\
         <text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 {})\">{y_label}</text>\n\
         {body}</svg>\n",
        W / 2.0,
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD,
        W / 2.0,
        H - 12.0,
        H / 2.0,
        H / 2.0,
    )
}

/// Line chart of before/after intensity with dashed event-window markers.
pub fn curves_svg(before: &IntensitySeries, after: &IntensitySeries) -> String {
    let fmin = *before.frames.first().unwrap_or(&0) as f64;
    let fmax = (*before.frames.last().unwrap_or(&1) as f64).max(fmin + 1.0);
    let smax = before
        .scores
        .iter()
        .chain(&after.scores)
        .fold(1.0f64, |m, &v| m.max(v));
    let sx = |f: f64| PAD + (f - fmin) / (fmax - fmin) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - v.max(0.0) / smax * (H - 2.0 * PAD);

    let mut body = String::new();
    for (series, color) in [(before, BEFORE_COLOR), (after, AFTER_COLOR)] {
        body.push_str(&polyline(
            series.frames.iter().zip(&series.scores).map(|(&f, &v)| (sx(f as f64), sy(v))),
            color,
        ));
    }
    if let Some((s, e)) = before.event.or(after.event) {
        for f in [s, e] {
            let x = sx(f as f64);
            let _ = writeln!(
                body,
                "<line x1=\"{x:.2}\" y1=\"{PAD}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>",
                H - PAD
            );
        }
    }
    frame_svg(&body, &before.video_id, "frame", "intensity")
}

/// Writes `<stem>.csv` and `<stem>.svg` into `dir` and returns both paths.
pub fn emit_curves(before: &IntensitySeries, after: &IntensitySeries, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let csv = curves_csv(before, after)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let svg_path = dir.join(format!("{stem}.svg"));
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&svg_path, curves_svg(before, after)).map_err(|e| Error::io(&svg_path, e))?;
    Ok(vec![csv_path, svg_path])
}

pub fn roc_csv(curves: &[(&str, &Roc)]) -> String {
    let mut out = String::from("curve,fpr,tpr\n");
    for (name, roc) in curves {
        for (f, t) in &roc.points {
            let _ = writeln!(out, "{name},{f},{t}");
        }
    }
    out
}

pub fn roc_svg(curves: &[(&str, &Roc, &str)]) -> String {
    let side = H - 2.0 * PAD;
    let sx = |f: f64| PAD + f * side;
    let sy = |t: f64| H - PAD - t * side;
    let mut body = format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"lightgray\" stroke-dasharray=\"4 3\"/>\n",
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(1.0)
    );
    for (k, (name, roc, color)) in curves.iter().enumerate() {
        body.push_str(&polyline(roc.points.iter().map(|&(f, t)| (sx(f), sy(t))), color));
        let _ = writeln!(
            body,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{name} (AUC {:.3})</text>",
            sx(1.0) + 12.0,
            PAD + 16.0 * (k as f64 + 1.0),
            roc.auc
        );
    }
    frame_svg(&body, "ROC", "false positive rate", "true positive rate")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_columns() {
        let b = IntensitySeries::new("v", vec![1.0, 2.0], Some((0, 1))).unwrap();
        let a = IntensitySeries::new("v", vec![0.5, 0.25], None).unwrap();
        assert_eq!(curves_csv(&b, &a).unwrap(), "frame,before,after\n0,1,0.5\n1,2,0.25\n");
        let svg = curves_svg(&b, &a);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
    }
}
