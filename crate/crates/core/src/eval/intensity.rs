use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Per-frame expression intensity reported by an external detector for one
/// video.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySeries {
    pub video_id: String,
    pub frames: Vec<usize>,
    pub scores: Vec<f64>,
    /// Inclusive expression event window, in frame numbers.
    pub event: Option<(usize, usize)>,
}

impl IntensitySeries {
    pub fn new(video_id: impl Into<String>, scores: Vec<f64>, event: Option<(usize, usize)>) -> Result<Self> {
        let s = IntensitySeries {
            video_id: video_id.into(),
            frames: (0..scores.len()).collect(),
            scores,
            event,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("{}: non-finite score", self.video_id)));
        }
        if let Some((s, e)) = self.event {
            if s >= e {
                return Err(Error::Parse(format!(
                    "{}: event_start {s} must precede event_end {e}",
                    self.video_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Mean score over `window` (inclusive frame numbers), or over the whole
    /// series when `window` is `None`. `None` if no frame falls inside.
    pub fn window_mean(&self, window: Option<(usize, usize)>) -> Option<f64> {
        let (sum, n) = self
            .frames
            .iter()
            .zip(&self.scores)
            .filter(|(&f, _)| window.is_none_or(|(s, e)| f >= s && f <= e))
            .fold((0.0, 0usize), |(a, n), (_, &v)| (a + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Whether `frame` lies inside the event window.
    pub fn in_event(&self, frame: usize) -> Option<bool> {
        self.event.map(|(s, e)| frame >= s && frame <= e)
    }
}

/// Reads `video_id,frame,score[,event_start,event_end]` rows into one series
/// per video, ordered by video id.
pub fn load_intensity_csv(path: &Path) -> Result<Vec<IntensitySeries>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_intensity(rdr)
}

pub fn parse_intensity_str(text: &str) -> Result<Vec<IntensitySeries>> {
    let rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    parse_intensity(rdr)
}

fn parse_intensity<R: std::io::Read>(mut rdr: csv::Reader<R>) -> Result<Vec<IntensitySeries>> {
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let h: Vec<&str> = headers.iter().collect();
    if h.len() < 3 || h[..3] != ["video_id", "frame", "score"] {
        return Err(Error::Parse(format!(
            "intensity header must start with video_id,frame,score (found {h:?})"
        )));
    }

    let mut videos: BTreeMap<String, IntensitySeries> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let row = line + 2;
        let id = rec.get(0).unwrap_or("").to_string();
        let frame: usize = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::Parse(format!("row {row}: non-numeric frame")))?;
        let score: f64 = rec
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::Parse(format!("row {row}: non-numeric score")))?;
        if !score.is_finite() {
            return Err(Error::Parse(format!("row {row}: non-finite score")));
        }
        let opt = |i: usize| -> Result<Option<usize>> {
            match rec.get(i).filter(|s| !s.is_empty()) {
                None => Ok(None),
                Some(s) => s
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Parse(format!("row {row}: non-numeric event bound"))),
            }
        };
        let event = match (opt(3)?, opt(4)?) {
            (Some(s), Some(e)) => Some((s, e)),
            (None, None) => None,
            _ => return Err(Error::Parse(format!("row {row}: event window needs both bounds"))),
        };

        let series = videos.entry(id.clone()).or_insert_with(|| IntensitySeries {
            video_id: id.clone(),
            frames: Vec::new(),
            scores: Vec::new(),
            event: None,
        });
        if let Some(&last) = series.frames.last() {
            if frame <= last {
                return Err(Error::Parse(format!(
                    "row {row}: video {id} frame {frame} is duplicate or out of order"
                )));
            }
        }
        if let Some(ev) = event {
            match series.event {
                Some(prev) if prev != ev => {
                    return Err(Error::Parse(format!(
                        "row {row}: video {id} has conflicting event windows"
                    )))
                }
                _ => series.event = Some(ev),
            }
        }
        series.frames.push(frame);
        series.scores.push(score);
    }

    let out: Vec<IntensitySeries> = videos.into_values().collect();
    for s in &out {
        s.validate()?;
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("intensity file has no rows"));
    }
    Ok(out)
}
