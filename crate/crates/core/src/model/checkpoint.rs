//! Binary checkpoint of both encoders.
//!
//! Layout (all little-endian):
//!
//! ```text
//! b"MBT1"
//! audio encoder header, motion encoder header:
//!   u32 x 13: input_dim, num_layers, hidden_dim, num_heads, embed_dim, bar_len,
//!             ffn_mult, activation code, phase_features, phase_rotation,
//!             use_contacts, alpha_logit_init (f32 bits), alpha_val_init (f32 bits)
//! u64 total scalar count
//! f32 x count: audio parameters then motion parameters, each in layout order
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::config::{Activation, EncoderConfig};
use crate::model::params::EncoderParams;

pub const MAGIC: &[u8; 4] = b"MBT1";
const HEADER_FIELDS: usize = 13;

#[derive(Clone, Debug, PartialEq)]
pub struct DualEncoder {
    pub audio_cfg: EncoderConfig,
    pub motion_cfg: EncoderConfig,
    pub audio: EncoderParams,
    pub motion: EncoderParams,
}

fn header(cfg: &EncoderConfig) -> [u32; HEADER_FIELDS] {
    [
        cfg.input_dim as u32,
        cfg.num_layers as u32,
        cfg.hidden_dim as u32,
        cfg.num_heads as u32,
        cfg.embed_dim as u32,
        cfg.bar_len as u32,
        cfg.ffn_mult as u32,
        cfg.activation.code(),
        cfg.phase_features as u32,
        cfg.phase_rotation as u32,
        cfg.use_contacts as u32,
        (cfg.alpha_logit_init as f32).to_bits(),
        (cfg.alpha_val_init as f32).to_bits(),
    ]
}

fn flag(v: u32, name: &str) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(Error::Checkpoint(format!("flag {name} has value {v}"))),
    }
}

fn config_from_header(h: &[u32]) -> Result<EncoderConfig> {
    let activation = Activation::from_code(h[7])
        .ok_or_else(|| Error::Checkpoint(format!("unknown activation code {}", h[7])))?;
    let cfg = EncoderConfig {
        input_dim: h[0] as usize,
        num_layers: h[1] as usize,
        hidden_dim: h[2] as usize,
        num_heads: h[3] as usize,
        embed_dim: h[4] as usize,
        bar_len: h[5] as usize,
        ffn_mult: h[6] as usize,
        activation,
        phase_features: flag(h[8], "phase_features")?,
        phase_rotation: flag(h[9], "phase_rotation")?,
        use_contacts: flag(h[10], "use_contacts")?,
        alpha_logit_init: f32::from_bits(h[11]) as f64,
        alpha_val_init: f32::from_bits(h[12]) as f64,
    };
    cfg.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(cfg)
}

impl DualEncoder {
    pub fn to_bytes(&self) -> Vec<u8> {
        let count = self.audio.num_scalars() + self.motion.num_scalars();
        let mut out = Vec::with_capacity(8 + 8 * HEADER_FIELDS + 8 + 4 * count);
        out.extend_from_slice(MAGIC);
        for cfg in [&self.audio_cfg, &self.motion_cfg] {
            for v in header(cfg) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&(count as u64).to_le_bytes());
        for p in [&self.audio, &self.motion] {
            for t in p.tensors() {
                for &v in t.as_slice() {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header_len = 4 + 2 * 4 * HEADER_FIELDS + 8;
        if bytes.len() < header_len {
            return Err(Error::Checkpoint(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let words: Vec<u32> = bytes[4..4 + 8 * HEADER_FIELDS]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let audio_cfg = config_from_header(&words[..HEADER_FIELDS])?;
        let motion_cfg = config_from_header(&words[HEADER_FIELDS..])?;
        let count_at = 4 + 8 * HEADER_FIELDS;
        let count = u64::from_le_bytes(bytes[count_at..count_at + 8].try_into().unwrap()) as usize;

        let n_audio = EncoderParams::zeros(&audio_cfg).num_scalars();
        let n_motion = EncoderParams::zeros(&motion_cfg).num_scalars();
        if count != n_audio + n_motion {
            return Err(Error::Checkpoint(format!(
                "parameter count {count} does not match configs ({})",
                n_audio + n_motion
            )));
        }
        let body = &bytes[header_len..];
        if body.len() != 4 * count {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter bytes, found {}",
                4 * count,
                body.len()
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let audio = EncoderParams::from_flat(&audio_cfg, &values[..n_audio])?;
        let motion = EncoderParams::from_flat(&motion_cfg, &values[n_audio..])?;
        Ok(Self {
            audio_cfg,
            motion_cfg,
            audio,
            motion,
        })
    }
}

pub fn save_checkpoint(path: &Path, model: &DualEncoder) -> Result<()> {
    fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<DualEncoder> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    DualEncoder::from_bytes(&fs::read(path)?)
}
