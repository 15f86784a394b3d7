use std::fmt;

use crate::error::{Error, Result};
use crate::eval::intensity::IntensitySeries;

/// Reported change for an increase over a zero baseline, and the cap on any
/// increase.
pub const MAX_INCREASE_PCT: f64 = 999.0;

pub const DEFAULT_NOISE_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Removed,
    Reduced,
    Increased,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Removed, Outcome::Reduced, Outcome::Increased];
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Removed => "Removed",
            Outcome::Reduced => "Reduced",
            Outcome::Increased => "Increased",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeCase {
    pub case: Outcome,
    pub change_pct: f64,
}

impl OutcomeCase {
    pub fn removed() -> Self {
        OutcomeCase {
            case: Outcome::Removed,
            change_pct: 100.0,
        }
    }
}

/// Compares mean intensity over the event window (whole series if no
/// window is annotated) before and after suppression.
pub fn classify_outcome(before: &IntensitySeries, after: &IntensitySeries, noise_floor: f64) -> Result<OutcomeCase> {
    if before.len() != after.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} frames", before.len()),
            found: format!("{} frames", after.len()),
        });
    }
    if before.video_id != after.video_id {
        return Err(Error::InvalidParameter(format!(
            "comparing video {} against {}",
            before.video_id, after.video_id
        )));
    }
    let window = before.event.or(after.event);
    let b = before
        .window_mean(window)
        .ok_or(Error::EmptyInput("no frames inside the event window"))?;
    let a = after
        .window_mean(window)
        .ok_or(Error::EmptyInput("no frames inside the event window"))?;

    if a <= noise_floor {
        return Ok(OutcomeCase::removed());
    }
    if a > b {
        let change = if b == 0.0 {
            MAX_INCREASE_PCT
        } else {
            ((a - b) / b * 100.0).min(MAX_INCREASE_PCT)
        };
        return Ok(OutcomeCase {
            case: Outcome::Increased,
            change_pct: change,
        });
    }
    let change = if b == 0.0 { 0.0 } else { (b - a) / b * 100.0 };
    Ok(OutcomeCase {
        case: Outcome::Reduced,
        change_pct: change,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseRow {
    pub case: Outcome,
    pub videos: usize,
    /// Share of all videos, rounded to an integer percent.
    pub pct_videos: u32,
    /// Mean `change_pct` over this case's videos; `None` when there are none.
    pub mean_change: Option<f64>,
}

impl CaseRow {
    /// Table cells: case, % of videos, % change. A Removed row always shows
    /// 100% since that is its definition.
    pub fn cells(&self) -> [String; 3] {
        let change = match (self.case, self.mean_change) {
            (Outcome::Removed, _) => "100%".to_string(),
            (_, Some(c)) => format!("{}%", c.round() as i64),
            (_, None) => "—".to_string(),
        };
        [self.case.to_string(), format!("{}%", self.pct_videos), change]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub total: usize,
    pub rows: [CaseRow; 3],
}

impl Aggregate {
    pub fn row(&self, case: Outcome) -> &CaseRow {
        &self.rows[case as usize]
    }
}

pub fn aggregate(outcomes: &[OutcomeCase]) -> Result<Aggregate> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput("aggregate needs at least one outcome"));
    }
    let n = outcomes.len();
    let rows = Outcome::ALL.map(|case| {
        let changes: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.case == case)
            .map(|o| o.change_pct)
            .collect();
        CaseRow {
            case,
            videos: changes.len(),
            pct_videos: (100.0 * changes.len() as f64 / n as f64).round() as u32,
            mean_change: (!changes.is_empty()).then(|| changes.iter().sum::<f64>() / changes.len() as f64),
        }
    });
    Ok(Aggregate { total: n, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub per_video: Vec<(String, OutcomeCase)>,
    pub aggregate: Aggregate,
    pub noise_floor: f64,
}

/// Pairs before/after series by video id and classifies each video.
pub fn evaluate(before: &[IntensitySeries], after: &[IntensitySeries], noise_floor: f64) -> Result<EvaluationReport> {
    let mut per_video = Vec::with_capacity(before.len());
    for b in before {
        let a = after
            .iter()
            .find(|a| a.video_id == b.video_id)
            .ok_or_else(|| Error::InvalidParameter(format!("video {} missing from the after set", b.video_id)))?;
        per_video.push((b.video_id.clone(), classify_outcome(b, a, noise_floor)?));
    }
    if let Some(extra) = after.iter().find(|a| !before.iter().any(|b| b.video_id == a.video_id)) {
        return Err(Error::InvalidParameter(format!(
            "video {} missing from the before set",
            extra.video_id
        )));
    }
    per_video.sort_by(|a, b| a.0.cmp(&b.0));
    let outcomes: Vec<OutcomeCase> = per_video.iter().map(|(_, o)| *o).collect();
    Ok(EvaluationReport {
        aggregate: aggregate(&outcomes)?,
        per_video,
        noise_floor,
    })
}

impl EvaluationReport {
    /// Aligned-column text mirroring the published table layout.
    pub fn render_text(&self, label: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# % change = mean detector intensity over the event window (whole video if unannotated); noise floor {}\n",
            self.noise_floor
        ));
        out.push_str(&format!("# {} videos\n", self.aggregate.total));
        out.push_str(&format!("{:<24} {:>12} {:>12}\n", "Case", "% of videos", "% changes"));
        for row in &self.aggregate.rows {
            let [case, pct, change] = row.cells();
            let name = if label.is_empty() { case } else { format!("{label} {case}") };
            out.push_str(&format!("{name:<24} {pct:>12} {change:>12}\n"));
        }
        out.push('\n');
        out.push_str(&format!("{:<24} {:>12} {:>12}\n", "video_id", "case", "change_pct"));
        for (id, o) in &self.per_video {
            out.push_str(&format!("{id:<24} {:>12} {:>12.2}\n", o.case.to_string(), o.change_pct));
        }
        out
    }

    pub fn render_table_csv(&self) -> String {
        let mut out = String::from("case,pct_videos,pct_change_mean\n");
        for row in &self.aggregate.rows {
            let [case, pct, change] = row.cells();
            out.push_str(&format!("{case},{pct},{change}\n"));
        }
        out
    }

    pub fn render_videos_csv(&self) -> String {
        let mut out = String::from("video_id,case,change_pct\n");
        for (id, o) in &self.per_video {
            out.push_str(&format!("{id},{},{}\n", o.case, o.change_pct));
        }
        out
    }
}
