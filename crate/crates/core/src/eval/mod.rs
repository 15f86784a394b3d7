//! Suppression evaluation from external detector scores, plus synthetic
//! sequences with known flow.

pub mod curves;
pub mod intensity;
pub mod outcome;
pub mod roc;
pub mod synth;

pub use curves::emit_curves;
pub use intensity::{load_intensity_csv, IntensitySeries};
pub use outcome::{
    aggregate, classify_outcome, evaluate, Aggregate, CaseRow, EvaluationReport, Outcome, OutcomeCase,
    DEFAULT_NOISE_FLOOR,
};
pub use roc::{roc_curve, Roc};
pub use synth::{random_texture, synth_sequence, Deform};

/// Frame-level `(score, in_event)` pairs of every series that has an event
/// window; the input for an ROC curve.
pub fn labelled_scores(series: &[IntensitySeries]) -> Vec<(f64, bool)> {
    series
        .iter()
        .filter(|s| s.event.is_some())
        .flat_map(|s| {
            s.frames
                .iter()
                .zip(&s.scores)
                .map(|(&f, &v)| (v, s.in_event(f).unwrap_or(false)))
        })
        .collect()
}
