//! Phase-rotated, contact-guided encoders and the machinery to train them.

pub mod attention;
pub mod autodiff;
pub mod checkpoint;
pub mod config;
mod dual;
pub mod encoder;
pub mod params;

pub use attention::{bar_phase, contact_attention, phase_rotate, AttentionOutput};
pub use checkpoint::{load_checkpoint, save_checkpoint, DualEncoder};
pub use config::{Activation, EncoderConfig};
pub use encoder::{contact_scalars, encoder_forward, trace_encoder, EncoderOutput, EncoderTrace};
pub use params::EncoderParams;
