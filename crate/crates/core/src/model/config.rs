use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Tanh approximation of GELU.
    Gelu,
}

impl Activation {
    pub fn code(self) -> u32 {
        match self {
            Activation::Gelu => 0,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Gelu),
            _ => None,
        }
    }
}

/// Shape and options of one encoder stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    /// Feature width of the incoming tokens (mel bands or 9 x joints).
    pub input_dim: usize,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub embed_dim: usize,
    pub bar_len: usize,
    /// Feed-forward width as a multiple of `hidden_dim`.
    #[serde(default = "default_ffn_mult")]
    pub ffn_mult: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// Append `(cos phi_t, sin phi_t)` to every input token.
    #[serde(default = "default_true")]
    pub phase_features: bool,
    /// Apply phase rotations to queries and keys.
    #[serde(default = "default_true")]
    pub phase_rotation: bool,
    /// Bias attention with per-beat contact probabilities.
    #[serde(default)]
    pub use_contacts: bool,
    #[serde(default = "default_alpha")]
    pub alpha_logit_init: f64,
    #[serde(default = "default_alpha")]
    pub alpha_val_init: f64,
}

fn default_ffn_mult() -> usize {
    2
}
fn default_activation() -> Activation {
    Activation::Gelu
}
fn default_true() -> bool {
    true
}
fn default_alpha() -> f64 {
    0.5
}

impl EncoderConfig {
    /// Six layers, 512 hidden units, eight heads, 128-dim embeddings.
    pub fn full_scale(input_dim: usize, bar_len: usize, use_contacts: bool) -> Self {
        Self {
            input_dim,
            num_layers: 6,
            hidden_dim: 512,
            num_heads: 8,
            embed_dim: 128,
            bar_len,
            ffn_mult: 2,
            activation: Activation::Gelu,
            phase_features: true,
            phase_rotation: true,
            use_contacts,
            alpha_logit_init: 0.5,
            alpha_val_init: 0.5,
        }
    }

    /// Desk-scale default: 2 layers, hidden 64, 4 heads, 32-dim embeddings.
    pub fn tiny(input_dim: usize, bar_len: usize, use_contacts: bool) -> Self {
        Self {
            num_layers: 2,
            hidden_dim: 64,
            num_heads: 4,
            embed_dim: 32,
            ..Self::full_scale(input_dim, bar_len, use_contacts)
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads.max(1)
    }

    /// Width seen by the input projection.
    pub fn token_dim(&self) -> usize {
        self.input_dim + if self.phase_features { 2 } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("input_dim", self.input_dim),
            ("num_layers", self.num_layers),
            ("hidden_dim", self.hidden_dim),
            ("num_heads", self.num_heads),
            ("embed_dim", self.embed_dim),
            ("bar_len", self.bar_len),
            ("ffn_mult", self.ffn_mult),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.hidden_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "hidden_dim {} is not divisible by {} heads",
                self.hidden_dim, self.num_heads
            )));
        }
        if self.head_dim() % 2 != 0 {
            return Err(Error::Config(format!(
                "head dimension {} must be even for channel pairing",
                self.head_dim()
            )));
        }
        if !(self.alpha_logit_init >= 0.0 && self.alpha_val_init >= 0.0) {
            return Err(Error::Config("contact scalar initial values must be nonnegative".into()));
        }
        Ok(())
    }
}
