//! Bar-phase rotations and contact-guided attention on plain matrices.
//!
//! The encoder builds the same computation on the autodiff graph; these
//! functions are the direct, allocation-light versions used for inspection
//! and as references in tests.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{dot, Matrix};

/// `2*pi*(t mod B)/B`.
pub fn bar_phase(t: usize, bar_len: usize) -> f64 {
    2.0 * PI * (t % bar_len) as f64 / bar_len as f64
}

/// Rotates consecutive channel pairs `(x, y)` by `phi` in place.
pub(crate) fn rotate_pairs(v: &mut [f64], phi: f64) {
    let (s, c) = phi.sin_cos();
    for pair in v.chunks_exact_mut(2) {
        let (x, y) = (pair[0], pair[1]);
        pair[0] = x * c - y * s;
        pair[1] = x * s + y * c;
    }
}

pub fn phase_rotate(v: &[f64], phi: f64) -> Result<Vec<f64>> {
    if v.len() % 2 != 0 {
        return Err(Error::domain(format!(
            "phase rotation needs an even head dimension, got {}",
            v.len()
        )));
    }
    let mut out = v.to_vec();
    rotate_pairs(&mut out, phi);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    /// Row-stochastic `K x K` attention matrix.
    pub weights: Matrix,
    /// `K x head_dim` attended values.
    pub output: Matrix,
}

/// Numerically stable softmax of one row, in place.
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Scaled dot-product attention whose logits gain `alpha_logit * r_u` and whose
/// values are scaled by `1 + alpha_val * r_u`. Inputs are already rotated.
/// With `contacts = None` this is plain attention.
pub fn contact_attention(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    contacts: Option<&[f64]>,
    alpha_logit: f64,
    alpha_val: f64,
) -> Result<AttentionOutput> {
    let n = q.rows();
    let head_dim = q.cols();
    if k.shape() != (n, head_dim) {
        return Err(Error::shape("keys", format!("{n}x{head_dim}"), format!("{}x{}", k.rows(), k.cols())));
    }
    if v.rows() != n {
        return Err(Error::shape("values", format!("{n} rows"), v.rows()));
    }
    if !(alpha_logit >= 0.0 && alpha_val >= 0.0) {
        return Err(Error::domain("contact scalars must be nonnegative"));
    }
    if let Some(r) = contacts {
        if r.len() != n {
            return Err(Error::shape("contacts", n, r.len()));
        }
        if r.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::domain("contact probabilities must lie in [0, 1]"));
        }
    }

    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut weights = Matrix::zeros(n, n);
    for t in 0..n {
        let row = weights.row_mut(t);
        for (u, w) in row.iter_mut().enumerate() {
            *w = dot(q.row(t), k.row(u)) * scale;
            if let Some(r) = contacts {
                *w += alpha_logit * r[u];
            }
        }
        softmax_in_place(row);
    }

    let mut output = Matrix::zeros(n, v.cols());
    for t in 0..n {
        for u in 0..n {
            let gain = contacts.map_or(1.0, |r| 1.0 + alpha_val * r[u]);
            let w = weights.get(t, u) * gain;
            for (o, x) in output.row_mut(t).iter_mut().zip(v.row(u)) {
                *o += w * x;
            }
        }
    }
    Ok(AttentionOutput { weights, output })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_values() {
        assert_eq!(bar_phase(0, 4), 0.0);
        assert_eq!(bar_phase(2, 4), PI);
        assert_eq!(bar_phase(5, 4), PI / 2.0);
    }

    #[test]
    fn quarter_turn() {
        let v = phase_rotate(&[1.0, 0.0], PI / 2.0).unwrap();
        assert!(v[0].abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
        assert_eq!(phase_rotate(&[0.3, -2.0, 1.0, 4.0], 0.0).unwrap(), vec![0.3, -2.0, 1.0, 4.0]);
        assert!(phase_rotate(&[1.0, 2.0, 3.0], 0.1).is_err());
    }

    #[test]
    fn contact_bias_closed_form() {
        let q = Matrix::zeros(2, 2);
        let k = Matrix::zeros(2, 2);
        let v = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let out = contact_attention(&q, &k, &v, Some(&[0.0, 1.0]), 1.0, 0.0).unwrap();
        for t in 0..2 {
            assert!((out.weights.get(t, 0) - 0.2689).abs() < 1e-4);
            assert!((out.weights.get(t, 1) - 0.7311).abs() < 1e-4);
        }
    }

    #[test]
    fn rejects_out_of_range_contacts() {
        let m = Matrix::zeros(2, 2);
        assert!(contact_attention(&m, &m, &m, Some(&[0.0, 1.5]), 1.0, 1.0).is_err());
        assert!(contact_attention(&m, &m, &m, Some(&[0.0, 0.5]), -1.0, 1.0).is_err());
    }
}
