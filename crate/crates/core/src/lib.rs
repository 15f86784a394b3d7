//! Facial expression suppression driven by optical strain.
//!
//! Aligned face frames go through dense optical flow, the flow's strain
//! magnitude is thresholded into a mask, masked pixels are copied from a
//! neutral reference frame, and the result is smoothed. The [`eval`] module
//! scores the outcome from external detector intensities.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod error;
pub mod eval;
pub mod flow;
pub mod frame_io;
pub mod raster;
pub mod strain;
pub mod suppress;

pub use align::{LandmarkSet, SimilarityTransform};
pub use error::{Error, Result};
pub use flow::{FlowField, FlowParams};
pub use frame_io::{Frame, FrameRate, FrameSequence, ImageFormat};
pub use strain::{Normalization, StrainMap};
pub use suppress::{BinaryMask, ReferencePolicy, SuppressionConfig, SuppressionOutput};
