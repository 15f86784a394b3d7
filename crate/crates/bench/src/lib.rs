//! Deterministic inputs shared by the kernel benchmarks.

use strainveil_core::eval::{random_texture, synth_sequence, Deform};
use strainveil_core::{FlowField, Frame, FrameSequence};

/// Texture smoothness used for every fixture; matches the CLI synth default.
pub const SMOOTHNESS: f64 = 12.0;

/// A textured frame and its bulged successor, with the true flow between them.
pub fn frame_pair(size: usize) -> (Frame, Frame, FlowField) {
    let (seq, truth) = bulge_sequence(size, 3);
    let f = seq.frames();
    (f[1].clone(), f[2].clone(), truth[1].clone())
}

/// A short bulge sequence on a seeded texture, sized `size` squared.
/// Amplitude 4 needs `size >= 80` to keep the warp invertible.
pub fn bulge_sequence(size: usize, frames: usize) -> (FrameSequence, Vec<FlowField>) {
    let base = random_texture(size, size, 42, SMOOTHNESS);
    synth_sequence(&base, Deform::Bulge, 4.0, frames).expect("fixture parameters are stable")
}
