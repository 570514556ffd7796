//! Beat-token encoder: phase-rotated (optionally contact-guided) self-attention
//! blocks, pre-norm residuals, a pooled projection head and two per-beat
//! rhythm heads.

use crate::error::{Error, Result};
use crate::model::autodiff::{softplus, Gradients, Graph, Var};
use crate::model::config::EncoderConfig;
use crate::model::params::EncoderParams;
use crate::rhythm::grid::BeatGrid;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput {
    /// Final (layer-normed) per-beat states, `K x hidden_dim`.
    pub hidden: Matrix,
    /// Unit-norm clip embedding.
    pub z: Vec<f64>,
    /// Nonnegative onset strength per beat.
    pub onset_pred: Vec<f64>,
    /// Contact probability per beat.
    pub contact_pred: Vec<f64>,
}

/// A forward pass recorded on a graph, ready for a seeded backward pass.
pub struct EncoderTrace {
    pub graph: Graph,
    params: Vec<Var>,
    pub z: Var,
    pub onset: Var,
    pub contact: Var,
    pub hidden: Var,
}

impl EncoderTrace {
    pub fn output(&self) -> EncoderOutput {
        EncoderOutput {
            hidden: self.graph.value(self.hidden).clone(),
            z: self.graph.value(self.z).as_slice().to_vec(),
            onset_pred: self.graph.value(self.onset).as_slice().to_vec(),
            contact_pred: self.graph.value(self.contact).as_slice().to_vec(),
        }
    }

    /// Backpropagates upstream gradients on the outputs into parameter gradients.
    /// Missing seeds mean zero gradient for that output.
    pub fn backward(
        &self,
        template: &EncoderParams,
        grad_z: Option<&[f64]>,
        grad_onset: Option<&[f64]>,
        grad_contact: Option<&[f64]>,
    ) -> EncoderParams {
        let mut seeds = Vec::new();
        if let Some(g) = grad_z {
            seeds.push((self.z, Matrix::row_vector(g)));
        }
        if let Some(g) = grad_onset {
            seeds.push((self.onset, Matrix::col_vector(g)));
        }
        if let Some(g) = grad_contact {
            seeds.push((self.contact, Matrix::col_vector(g)));
        }
        let grads: Gradients = self.graph.backward(&seeds);
        let mut out = template.zeros_like();
        for (slot, var) in out.tensors_mut().iter_mut().zip(&self.params) {
            if let Some(g) = grads.get(*var) {
                *slot = g.clone();
            }
        }
        out
    }
}

/// Effective nonnegative contact scalars `(alpha_logit, alpha_val)`.
pub fn contact_scalars(params: &EncoderParams) -> (f64, f64) {
    let raw = |n: &str| params.get(n).map_or(0.0, |m| m.get(0, 0));
    (softplus(raw("alpha_logit")), softplus(raw("alpha_val")))
}

fn check_inputs(
    tokens: &Matrix,
    grid: &BeatGrid,
    contacts: Option<&[f64]>,
    cfg: &EncoderConfig,
) -> Result<()> {
    if tokens.cols() != cfg.input_dim {
        return Err(Error::shape("tokens", format!("{} columns", cfg.input_dim), tokens.cols()));
    }
    if tokens.rows() != grid.num_beats || tokens.rows() == 0 {
        return Err(Error::shape("tokens", format!("{} rows", grid.num_beats), tokens.rows()));
    }
    if grid.bar_len != cfg.bar_len {
        return Err(Error::shape("grid.bar_len", cfg.bar_len, grid.bar_len));
    }
    if let Some(r) = contacts {
        if r.len() != tokens.rows() {
            return Err(Error::shape("contacts", tokens.rows(), r.len()));
        }
        if r.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::domain("contact probabilities must lie in [0, 1]"));
        }
    }
    Ok(())
}

/// Records the forward pass. Contacts are only used when `cfg.use_contacts`.
pub fn trace_encoder(
    tokens: &Matrix,
    grid: &BeatGrid,
    contacts: Option<&[f64]>,
    params: &EncoderParams,
    cfg: &EncoderConfig,
) -> Result<EncoderTrace> {
    check_inputs(tokens, grid, contacts, cfg)?;
    let k = tokens.rows();
    let h = cfg.hidden_dim;
    let dh = cfg.head_dim();
    let phases: Vec<f64> = (0..k).map(|t| grid.phase(t)).collect();

    let mut g = Graph::new();
    let p: Vec<Var> = params.tensors().iter().map(|t| g.leaf(t.clone())).collect();
    let mut next = p.iter().copied();
    let mut take = || next.next().expect("parameter layout");

    let input = if cfg.phase_features {
        let mut rows = Vec::with_capacity(k);
        for (t, &phi) in phases.iter().enumerate() {
            let mut row = tokens.row(t).to_vec();
            row.extend([phi.cos(), phi.sin()]);
            rows.push(row);
        }
        Matrix::from_rows(&rows)?
    } else {
        tokens.clone()
    };
    let x = g.leaf(input);
    let (w_in, b_in) = (take(), take());
    let xw = g.matmul(x, w_in);
    let mut hid = g.add_row(xw, b_in);

    let contacts = if cfg.use_contacts { contacts } else { None };
    let scale = 1.0 / (dh as f64).sqrt();
    let alphas = contacts.map(|_| {
        (
            alpha_var(&mut g, &p, params, "alpha_logit"),
            alpha_var(&mut g, &p, params, "alpha_val"),
        )
    });

    for _ in 0..cfg.num_layers {
        let (ln1_g, ln1_b) = (take(), take());
        let (wq, bq, wk, bk, wv, bv, wo, bo) = (take(), take(), take(), take(), take(), take(), take(), take());
        let (ln2_g, ln2_b) = (take(), take());
        let (w1, b1, w2, b2) = (take(), take(), take(), take());

        let a = g.layer_norm(hid, ln1_g, ln1_b);
        let q = g.matmul(a, wq);
        let mut q = g.add_row(q, bq);
        let kk = g.matmul(a, wk);
        let mut kk = g.add_row(kk, bk);
        let v = g.matmul(a, wv);
        let v = g.add_row(v, bv);
        if cfg.phase_rotation {
            q = g.rotate(q, phases.clone());
            kk = g.rotate(kk, phases.clone());
        }

        let mut heads = Vec::with_capacity(cfg.num_heads);
        for head in 0..cfg.num_heads {
            let qh = g.col_slice(q, head * dh, dh);
            let kh = g.col_slice(kk, head * dh, dh);
            let vh = g.col_slice(v, head * dh, dh);
            let logits = g.matmul_t(qh, kh);
            let mut logits = g.scale(logits, scale);
            let mut vh = vh;
            if let Some(r) = contacts {
                let (a_logit, a_val) = alphas.expect("contact scalars");
                let bias = g.scalar_times(a_logit, Matrix::row_vector(r), 0.0);
                logits = g.add_row(logits, bias);
                let gain = g.scalar_times(a_val, Matrix::col_vector(r), 1.0);
                vh = g.row_scale(vh, gain);
            }
            let weights = g.softmax_rows(logits);
            heads.push(g.matmul(weights, vh));
        }
        let merged = g.concat_cols(&heads);
        let attn = g.matmul(merged, wo);
        let attn = g.add_row(attn, bo);
        hid = g.add(hid, attn);

        let f = g.layer_norm(hid, ln2_g, ln2_b);
        let f = g.matmul(f, w1);
        let f = g.add_row(f, b1);
        let f = g.gelu(f);
        let f = g.matmul(f, w2);
        let f = g.add_row(f, b2);
        hid = g.add(hid, f);
    }

    let (lnf_g, lnf_b) = (take(), take());
    let (w_proj, b_proj) = (take(), take());
    let (w_on, b_on) = (take(), take());
    let (w_c, b_c) = (take(), take());
    let hidden = g.layer_norm(hid, lnf_g, lnf_b);

    let pooled = g.mean_rows(hidden);
    let proj = g.matmul(pooled, w_proj);
    let proj = g.add_row(proj, b_proj);
    let z = g.l2_normalize_rows(proj);

    let on = g.matmul(hidden, w_on);
    let on = g.add_row(on, b_on);
    let onset = g.softplus(on);
    let c = g.matmul(hidden, w_c);
    let c = g.add_row(c, b_c);
    let contact = g.sigmoid(c);
    debug_assert_eq!(h, g.value(hidden).cols());

    Ok(EncoderTrace {
        graph: g,
        params: p,
        z,
        onset,
        contact,
        hidden,
    })
}

/// Softplus of the raw scalar parameter, as a graph node.
fn alpha_var(g: &mut Graph, p: &[Var], params: &EncoderParams, name: &str) -> Var {
    let idx = params.index_of(name).expect("alpha parameter");
    g.softplus(p[idx])
}

pub fn encoder_forward(
    tokens: &Matrix,
    grid: &BeatGrid,
    contacts: Option<&[f64]>,
    params: &EncoderParams,
    cfg: &EncoderConfig,
) -> Result<EncoderOutput> {
    Ok(trace_encoder(tokens, grid, contacts, params, cfg)?.output())
}
