use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve by sweeping the threshold down through the distinct scores.
/// Tied scores move together, so ties contribute a diagonal segment.
pub fn roc_curve(scores: &[(f64, bool)]) -> Result<Roc> {
    if scores.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::InvalidParameter("ROC scores must be finite".into()));
    }
    let pos = scores.iter().filter(|(_, l)| *l).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let p = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        let q = *points.last().unwrap();
        auc += (p.0 - q.0) * (p.1 + q.1) / 2.0;
        points.push(p);
    }
    Ok(Roc { points, auc })
}
