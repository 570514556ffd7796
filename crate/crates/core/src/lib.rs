//! Rhythm-aware contrastive embeddings for music and dance.
//!
//! Clips are cut into beat-synchronous tokens (log-mel spectra for audio,
//! joint kinematics for motion), encoded by phase-rotated attention stacks and
//! trained with a contrastive loss over rhythm-aware negatives plus a
//! differentiable rhythm-alignment penalty.

pub mod align;
pub mod cli;
pub mod error;
pub mod model;
pub mod objectives;
pub mod rhythm;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Matrix;
