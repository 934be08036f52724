//! Minimal dense-tensor and reverse-mode autodiff core: enough to express,
//! train, and gradient-check the encoder, decoder, and probes in this crate.

mod adam;
mod gradcheck;
mod matrix;
mod real;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{finite_difference_check, GradCheckReport, ProbeResult};
pub use matrix::Matrix;
pub use real::Real;
pub use tape::{NodeId, Tape};
