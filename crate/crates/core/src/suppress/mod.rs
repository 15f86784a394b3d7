//! Strain-driven expression suppression: threshold masks, reference-frame
//! pixel replacement, and the two smoothing passes.

mod mask;

pub use mask::{
    despeckle, dilate, erode, mask_edge_band, median_smooth_edges, nearest_rank, replace_pixels,
    smooth_face, threshold_mask, BinaryMask,
};

use rayon::prelude::*;

use crate::error::{Error, Result, ResultExt};
use crate::flow::{compute_flow, FlowField, FlowParams};
use crate::frame_io::{to_luma, Frame, FrameSequence};
use crate::strain::{strain_sequence, Normalization, StrainMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferencePolicy {
    #[default]
    FirstFrame,
    /// Frame with the lowest mean raw strain among the first `window` frames
    /// (all frames when `None`).
    MinMeanStrain { window: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuppressionConfig {
    pub threshold_percentile: f64,
    pub reference_policy: ReferencePolicy,
    pub median_kernel: usize,
    pub edge_band: usize,
    pub face_blur_sigma: f64,
    pub mask_min_blob: usize,
    pub normalization: Normalization,
}

impl Default for SuppressionConfig {
    fn default() -> Self {
        SuppressionConfig {
            threshold_percentile: 10.0,
            reference_policy: ReferencePolicy::FirstFrame,
            median_kernel: 5,
            edge_band: 3,
            face_blur_sigma: 1.0,
            mask_min_blob: 9,
            normalization: Normalization::PerFrame,
        }
    }
}

impl SuppressionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.threshold_percentile) {
            return Err(Error::InvalidParameter(format!(
                "threshold_percentile {} outside [0, 100]",
                self.threshold_percentile
            )));
        }
        if self.median_kernel < 3 || self.median_kernel.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "median_kernel must be odd and >= 3 (got {})",
                self.median_kernel
            )));
        }
        if self.edge_band < 1 {
            return Err(Error::InvalidParameter("edge_band must be >= 1".into()));
        }
        if !(self.face_blur_sigma >= 0.0) || !self.face_blur_sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "face_blur_sigma {}",
                self.face_blur_sigma
            )));
        }
        if let ReferencePolicy::MinMeanStrain { window: Some(0) } = self.reference_policy {
            return Err(Error::InvalidParameter("reference window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Picks the reference frame from per-frame mean strain values.
/// Ties resolve to the lowest index.
pub fn select_reference_by_means(means: &[f64], policy: ReferencePolicy) -> Result<usize> {
    if means.is_empty() {
        return Err(Error::EmptyInput("reference selection needs at least one strain map"));
    }
    match policy {
        ReferencePolicy::FirstFrame => Ok(0),
        ReferencePolicy::MinMeanStrain { window } => {
            let n = window.unwrap_or(means.len()).clamp(1, means.len());
            let mut best = 0;
            for (i, &m) in means[..n].iter().enumerate().skip(1) {
                if m < means[best] {
                    best = i;
                }
            }
            Ok(best)
        }
    }
}

/// Index into `strains` of the reference entry under `policy`.
pub fn select_reference(strains: &[StrainMap], policy: ReferencePolicy) -> Result<usize> {
    let means: Vec<f64> = strains.iter().map(StrainMap::mean_magnitude).collect();
    select_reference_by_means(&means, policy)
}

/// Everything [`suppress_sequence`] produces. `strains[k]`, `masks[k]` and
/// `flows[k]` belong to frame `k + 1` (pair `k → k + 1`).
#[derive(Debug, Clone)]
pub struct SuppressionOutput {
    pub frames: FrameSequence,
    pub flows: Vec<FlowField>,
    pub strains: Vec<StrainMap>,
    pub masks: Vec<BinaryMask>,
    pub reference: usize,
}

/// Flow and strain for every consecutive pair of an aligned sequence.
pub fn sequence_strain(
    aligned: &FrameSequence,
    flow_params: &FlowParams,
    mode: Normalization,
) -> Result<(Vec<FlowField>, Vec<StrainMap>)> {
    let luma: Vec<Frame> = aligned.frames().par_iter().map(to_luma).collect();
    let flows: Vec<FlowField> = (1..luma.len())
        .into_par_iter()
        .map(|i| compute_flow(&luma[i - 1], &luma[i], flow_params).at_frame(i))
        .collect::<Result<_>>()?;
    let strains = strain_sequence(&flows, mode)?;
    Ok((flows, strains))
}

/// Runs flow, strain, masking, replacement and both smoothing passes over an
/// aligned sequence. Frame 0 and the reference frame pass through untouched.
pub fn suppress_sequence(
    aligned: &FrameSequence,
    cfg: &SuppressionConfig,
    flow_params: &FlowParams,
) -> Result<SuppressionOutput> {
    cfg.validate()?;
    flow_params.validate()?;
    if aligned.len() < 2 {
        return Err(Error::SequenceTooShort(aligned.len()));
    }

    let (flows, strains) = sequence_strain(aligned, flow_params, cfg.normalization)?;

    // frame 0 borrows the strain of the first pair; frame i > 0 has pair (i-1, i)
    let mut means = Vec::with_capacity(aligned.len());
    means.push(strains[0].mean_magnitude());
    means.extend(strains.iter().map(StrainMap::mean_magnitude));
    let reference = select_reference_by_means(&means, cfg.reference_policy)?;
    let ref_frame = &aligned.frames()[reference];

    let processed: Vec<(Frame, BinaryMask)> = (1..aligned.len())
        .into_par_iter()
        .map(|i| {
            let current = &aligned.frames()[i];
            let mask = threshold_mask(&strains[i - 1], cfg.threshold_percentile, cfg.mask_min_blob)
                .at_frame(i)?;
            if i == reference {
                return Ok((current.clone(), mask));
            }
            let out = composite(current, ref_frame, &mask, cfg).at_frame(i)?;
            Ok((out, mask))
        })
        .collect::<Result<_>>()?;

    let mut frames = Vec::with_capacity(aligned.len());
    frames.push(aligned.frames()[0].clone());
    let mut masks = Vec::with_capacity(processed.len());
    for (f, m) in processed {
        frames.push(f);
        masks.push(m);
    }
    Ok(SuppressionOutput {
        frames: FrameSequence::new(frames, aligned.fps)?,
        flows,
        strains,
        masks,
        reference,
    })
}

/// Replacement followed by edge-band median and full-face blur.
pub fn composite(current: &Frame, reference: &Frame, mask: &BinaryMask, cfg: &SuppressionConfig) -> Result<Frame> {
    let replaced = replace_pixels(current, reference, mask)?;
    let band = mask_edge_band(mask, cfg.edge_band)?;
    let median = median_smooth_edges(&replaced, &band, cfg.median_kernel)?;
    smooth_face(&median, cfg.face_blur_sigma)
}
