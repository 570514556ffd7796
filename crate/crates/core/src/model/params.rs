//! Named parameter tensors of one encoder, stored in a fixed order.
//!
//! Order (also the checkpoint order):
//!
//! ```text
//! input.weight [token_dim x H], input.bias [1 x H]
//! for each layer l:
//!   layer{l}.ln1.gamma, layer{l}.ln1.beta            [1 x H]
//!   layer{l}.attn.{wq,bq,wk,bk,wv,bv,wo,bo}          [H x H] / [1 x H]
//!   layer{l}.ln2.gamma, layer{l}.ln2.beta            [1 x H]
//!   layer{l}.ffn.w1 [H x fH], layer{l}.ffn.b1 [1 x fH]
//!   layer{l}.ffn.w2 [fH x H], layer{l}.ffn.b2 [1 x H]
//! final_ln.gamma, final_ln.beta                       [1 x H]
//! proj.weight [H x d], proj.bias [1 x d]
//! onset.weight [H x 1], onset.bias [1 x 1]
//! contact.weight [H x 1], contact.bias [1 x 1]
//! alpha_logit [1 x 1], alpha_val [1 x 1]             (pre-softplus)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::autodiff::inverse_softplus;
use crate::model::config::EncoderConfig;
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    FanIn,
    Zeros,
    Ones,
    AlphaLogit,
    AlphaVal,
}

/// `(name, rows, cols, init)` for every tensor, in serialization order.
fn layout(cfg: &EncoderConfig) -> Vec<(String, usize, usize, Init)> {
    let h = cfg.hidden_dim;
    let f = cfg.ffn_mult * h;
    let mut out = vec![
        ("input.weight".to_string(), cfg.token_dim(), h, Init::FanIn),
        ("input.bias".to_string(), 1, h, Init::Zeros),
    ];
    for l in 0..cfg.num_layers {
        let p = |s: &str| format!("layer{l}.{s}");
        out.extend([
            (p("ln1.gamma"), 1, h, Init::Ones),
            (p("ln1.beta"), 1, h, Init::Zeros),
            (p("attn.wq"), h, h, Init::FanIn),
            (p("attn.bq"), 1, h, Init::Zeros),
            (p("attn.wk"), h, h, Init::FanIn),
            (p("attn.bk"), 1, h, Init::Zeros),
            (p("attn.wv"), h, h, Init::FanIn),
            (p("attn.bv"), 1, h, Init::Zeros),
            (p("attn.wo"), h, h, Init::FanIn),
            (p("attn.bo"), 1, h, Init::Zeros),
            (p("ln2.gamma"), 1, h, Init::Ones),
            (p("ln2.beta"), 1, h, Init::Zeros),
            (p("ffn.w1"), h, f, Init::FanIn),
            (p("ffn.b1"), 1, f, Init::Zeros),
            (p("ffn.w2"), f, h, Init::FanIn),
            (p("ffn.b2"), 1, h, Init::Zeros),
        ]);
    }
    out.extend([
        ("final_ln.gamma".to_string(), 1, h, Init::Ones),
        ("final_ln.beta".to_string(), 1, h, Init::Zeros),
        ("proj.weight".to_string(), h, cfg.embed_dim, Init::FanIn),
        ("proj.bias".to_string(), 1, cfg.embed_dim, Init::Zeros),
        ("onset.weight".to_string(), h, 1, Init::FanIn),
        ("onset.bias".to_string(), 1, 1, Init::Zeros),
        ("contact.weight".to_string(), h, 1, Init::FanIn),
        ("contact.bias".to_string(), 1, 1, Init::Zeros),
        ("alpha_logit".to_string(), 1, 1, Init::AlphaLogit),
        ("alpha_val".to_string(), 1, 1, Init::AlphaVal),
    ]);
    out
}

/// Raw (pre-softplus) value giving the requested nonnegative scalar. Zero maps to
/// a raw value whose softplus underflows to exactly zero.
pub fn raw_for_alpha(alpha: f64) -> f64 {
    if alpha <= 0.0 {
        -1000.0
    } else {
        inverse_softplus(alpha)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    names: Vec<String>,
    tensors: Vec<Matrix>,
}

impl EncoderParams {
    /// Scaled uniform fan-in initialization, seeded.
    pub fn init(cfg: &EncoderConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, rows, cols, init) in layout(cfg) {
            let m = match init {
                Init::FanIn => {
                    let bound = 1.0 / (rows as f64).sqrt();
                    let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
                    Matrix::from_vec(rows, cols, data)?
                }
                Init::Zeros => Matrix::zeros(rows, cols),
                Init::Ones => Matrix::filled(rows, cols, 1.0),
                Init::AlphaLogit => Matrix::scalar(raw_for_alpha(cfg.alpha_logit_init)),
                Init::AlphaVal => Matrix::scalar(raw_for_alpha(cfg.alpha_val_init)),
            };
            names.push(name);
            tensors.push(m);
        }
        Ok(Self { names, tensors })
    }

    /// All-zero tensors with the layout of `cfg`; used for gradients and moments.
    pub fn zeros(cfg: &EncoderConfig) -> Self {
        let (names, tensors) = layout(cfg)
            .into_iter()
            .map(|(n, r, c, _)| (n, Matrix::zeros(r, c)))
            .unzip();
        Self { names, tensors }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect(),
        }
    }

    /// Fills tensors from a flat value slice in layout order.
    pub fn from_flat(cfg: &EncoderConfig, flat: &[f64]) -> Result<Self> {
        let mut out = Self::zeros(cfg);
        if flat.len() != out.num_scalars() {
            return Err(Error::shape("flat parameters", out.num_scalars(), flat.len()));
        }
        let mut offset = 0;
        for t in &mut out.tensors {
            let n = t.len();
            t.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.index_of(name).map(move |i| &mut self.tensors[i])
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.as_slice().iter().copied()).collect()
    }

    /// Reference to scalar `i` of the flattened layout.
    pub fn scalar_mut(&mut self, mut i: usize) -> &mut f64 {
        for t in &mut self.tensors {
            if i < t.len() {
                return &mut t.as_mut_slice()[i];
            }
            i -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn scalar(&self, mut i: usize) -> f64 {
        for t in &self.tensors {
            if i < t.len() {
                return t.as_slice()[i];
            }
            i -= t.len();
        }
        panic!("parameter index out of range");
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &EncoderParams) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.axpy(s, b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.iter().find(|(_, t)| !t.is_finite()).map(|(n, _)| n)
    }
}
