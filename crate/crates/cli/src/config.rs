//! Run configuration: suppression and flow parameters in a flat
//! `key = value` file.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use strainveil_core::{FlowParams, Normalization, ReferencePolicy, SuppressionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    FirstFrame,
    MinMeanStrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationName {
    PerFrame,
    PerSequence,
}

/// Every tunable of a suppression run. Missing keys take the library
/// defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub threshold_percentile: f64,
    pub reference_policy: PolicyName,
    /// Leading frames searched by `min_mean_strain`; all frames when absent.
    pub reference_window: Option<usize>,
    pub median_kernel: usize,
    pub edge_band: usize,
    pub face_blur_sigma: f64,
    pub mask_min_blob: usize,
    pub normalization: NormalizationName,
    pub pyramid_levels: usize,
    pub window_radius: usize,
    pub iterations_per_level: usize,
    pub regularization_eps: f64,
    pub max_displacement: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SuppressionConfig::default();
        let f = FlowParams::default();
        RunConfig {
            threshold_percentile: s.threshold_percentile,
            reference_policy: PolicyName::FirstFrame,
            reference_window: None,
            median_kernel: s.median_kernel,
            edge_band: s.edge_band,
            face_blur_sigma: s.face_blur_sigma,
            mask_min_blob: s.mask_min_blob,
            normalization: NormalizationName::PerFrame,
            pyramid_levels: f.pyramid_levels,
            window_radius: f.window_radius,
            iterations_per_level: f.iterations_per_level,
            regularization_eps: f.regularization_eps,
            max_displacement: f.max_displacement,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.reference_window.is_some() && self.reference_policy != PolicyName::MinMeanStrain {
            bail!("reference_window only applies to reference_policy = \"min_mean_strain\"");
        }
        self.suppression().validate()?;
        self.flow().validate()?;
        Ok(())
    }

    pub fn suppression(&self) -> SuppressionConfig {
        SuppressionConfig {
            threshold_percentile: self.threshold_percentile,
            reference_policy: match self.reference_policy {
                PolicyName::FirstFrame => ReferencePolicy::FirstFrame,
                PolicyName::MinMeanStrain => ReferencePolicy::MinMeanStrain {
                    window: self.reference_window,
                },
            },
            median_kernel: self.median_kernel,
            edge_band: self.edge_band,
            face_blur_sigma: self.face_blur_sigma,
            mask_min_blob: self.mask_min_blob,
            normalization: match self.normalization {
                NormalizationName::PerFrame => Normalization::PerFrame,
                NormalizationName::PerSequence => Normalization::PerSequence,
            },
        }
    }

    pub fn flow(&self) -> FlowParams {
        FlowParams {
            pyramid_levels: self.pyramid_levels,
            window_radius: self.window_radius,
            iterations_per_level: self.iterations_per_level,
            regularization_eps: self.regularization_eps,
            max_displacement: self.max_displacement,
        }
    }
}
