//! The paired audio and motion encoders.

use crate::error::{Error, Result};
use crate::model::checkpoint::DualEncoder;
use crate::model::config::EncoderConfig;
use crate::model::encoder::{trace_encoder, EncoderOutput, EncoderTrace};
use crate::model::params::EncoderParams;
use crate::rhythm::annotation::{Modality, TokenSequence};

impl DualEncoder {
    /// Fresh encoders; the motion stack is seeded with `seed + 1`.
    pub fn init(audio_cfg: EncoderConfig, motion_cfg: EncoderConfig, seed: u64) -> Result<Self> {
        if audio_cfg.embed_dim != motion_cfg.embed_dim {
            return Err(Error::Config(format!(
                "audio and motion embeddings differ in size ({} vs {})",
                audio_cfg.embed_dim, motion_cfg.embed_dim
            )));
        }
        Ok(Self {
            audio: EncoderParams::init(&audio_cfg, seed)?,
            motion: EncoderParams::init(&motion_cfg, seed.wrapping_add(1))?,
            audio_cfg,
            motion_cfg,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.audio_cfg.embed_dim
    }

    /// Audio encoding uses plain rotated attention.
    pub fn trace_audio(&self, seq: &TokenSequence) -> Result<EncoderTrace> {
        expect_modality(seq, Modality::Audio)?;
        trace_encoder(&seq.tokens, &seq.grid, None, &self.audio, &self.audio_cfg)
    }

    /// Motion encoding is guided by the annotated contact pulse.
    pub fn trace_motion(&self, seq: &TokenSequence) -> Result<EncoderTrace> {
        expect_modality(seq, Modality::Motion)?;
        trace_encoder(
            &seq.tokens,
            &seq.grid,
            Some(&seq.annotation.contact_pulse),
            &self.motion,
            &self.motion_cfg,
        )
    }

    pub fn encode_audio(&self, seq: &TokenSequence) -> Result<EncoderOutput> {
        Ok(self.trace_audio(seq)?.output())
    }

    pub fn encode_motion(&self, seq: &TokenSequence) -> Result<EncoderOutput> {
        Ok(self.trace_motion(seq)?.output())
    }
}

fn expect_modality(seq: &TokenSequence, want: Modality) -> Result<()> {
    if seq.modality != want {
        return Err(Error::domain(format!(
            "expected a {want:?} sequence, got {:?}",
            seq.modality
        )));
    }
    Ok(())
}
