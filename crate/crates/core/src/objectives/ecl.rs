//! Contrastive loss of audio anchors against their paired motion, with
//! in-batch, tempo and beat-jitter negatives in the denominator.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objectives::negatives::NegativeSet;
use crate::tensor::{dot, l2_norm, Matrix};

const NORM_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct EclResult {
    pub value: f64,
    pub per_anchor: Vec<f64>,
    /// Gradient with respect to each audio embedding (row).
    pub grad_anchors: Matrix,
    /// Gradient with respect to each paired motion embedding (row).
    pub grad_positives: Matrix,
    /// Gradient with respect to each anchor's jitter embeddings, for callers
    /// that do not treat them as constants.
    pub grad_jitter: Vec<Vec<Vec<f64>>>,
}

fn check_unit_rows(m: &Matrix, name: &str) -> Result<()> {
    for (i, row) in m.to_rows().iter().enumerate() {
        let n = l2_norm(row);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!("{name} row {i} has norm {n}, expected 1")));
        }
    }
    Ok(())
}

/// Softmax cross-entropy of logits whose target is index 0: `(loss, softmax)`.
fn target_zero_xent(logits: &[f64]) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = max + sum.ln() - logits[0];
    (loss, exps.into_iter().map(|e| e / sum).collect())
}

struct AnchorTerm {
    loss: f64,
    grad_anchor: Vec<f64>,
    /// `(batch row, gradient)` contributions to motion embeddings.
    grad_motion: Vec<(usize, Vec<f64>)>,
    grad_jitter: Vec<Vec<f64>>,
}

fn anchor_term(
    i: usize,
    anchor: &[f64],
    positives: &Matrix,
    negs: &NegativeSet,
    tempo_bank: &Matrix,
    tau: f64,
    grad_negatives: bool,
) -> AnchorTerm {
    let mut vecs: Vec<&[f64]> = vec![positives.row(i)];
    vecs.extend(negs.batch_negs.iter().map(|&j| positives.row(j)));
    vecs.extend(negs.tempo_negs.iter().map(|&k| tempo_bank.row(k)));
    vecs.extend(negs.jitter_negs.iter().map(Vec::as_slice));
    let logits: Vec<f64> = vecs.iter().map(|v| dot(anchor, v) / tau).collect();
    let (loss, probs) = target_zero_xent(&logits);

    let mut grad_anchor = vec![0.0; anchor.len()];
    for (v, p) in vecs.iter().zip(&probs) {
        for (g, x) in grad_anchor.iter_mut().zip(*v) {
            *g += p * x / tau;
        }
    }
    for (g, x) in grad_anchor.iter_mut().zip(vecs[0]) {
        *g -= x / tau;
    }

    let scaled = |w: f64| anchor.iter().map(|a| w * a / tau).collect::<Vec<f64>>();
    let mut grad_motion = vec![(i, scaled(probs[0] - 1.0))];
    if grad_negatives {
        for (&j, p) in negs.batch_negs.iter().zip(&probs[1..]) {
            grad_motion.push((j, scaled(*p)));
        }
    }
    let jitter_from = probs.len() - negs.jitter_negs.len();
    let grad_jitter = probs[jitter_from..].iter().map(|&p| scaled(p)).collect();
    AnchorTerm {
        loss,
        grad_anchor,
        grad_motion,
        grad_jitter,
    }
}

/// Mean over anchors of `-log(exp(s_ii/tau) / D_i)`. In-batch negatives receive
/// gradient and tempo negatives are constants. Jitter gradients are returned
/// separately in `grad_jitter`. With `symmetric`, the
/// motion-to-audio direction over the same in-batch negatives is averaged in.
pub fn ecl_loss(
    anchors: &Matrix,
    positives: &Matrix,
    negsets: &[NegativeSet],
    tempo_bank: &Matrix,
    tau: f64,
    symmetric: bool,
) -> Result<EclResult> {
    let n = anchors.rows();
    if positives.shape() != anchors.shape() {
        return Err(Error::shape(
            "positives",
            format!("{}x{}", n, anchors.cols()),
            format!("{}x{}", positives.rows(), positives.cols()),
        ));
    }
    if negsets.len() != n {
        return Err(Error::shape("negative sets", n, negsets.len()));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::domain(format!("temperature must be positive, got {tau}")));
    }
    if n == 0 {
        return Err(Error::domain("contrastive loss needs at least one anchor"));
    }
    check_unit_rows(anchors, "anchors")?;
    check_unit_rows(positives, "positives")?;
    if !tempo_bank.is_empty() {
        check_unit_rows(tempo_bank, "tempo bank")?;
    }
    for (i, ns) in negsets.iter().enumerate() {
        if ns.batch_negs.iter().any(|&j| j == i || j >= n) {
            return Err(Error::domain(format!("anchor {i} has an invalid in-batch negative")));
        }
        if ns.tempo_negs.iter().any(|&k| k >= tempo_bank.rows()) {
            return Err(Error::domain(format!("anchor {i} has a tempo negative outside the bank")));
        }
        if ns.jitter_negs.iter().any(|v| v.len() != anchors.cols()) {
            return Err(Error::shape("jitter negative", anchors.cols(), "a different length"));
        }
        if ns.jitter_negs.iter().any(|v| (l2_norm(v) - 1.0).abs() > NORM_TOL) {
            return Err(Error::domain(format!("anchor {i} has a non-unit jitter negative")));
        }
    }

    let forward: Vec<AnchorTerm> = (0..n)
        .into_par_iter()
        .map(|i| anchor_term(i, anchors.row(i), positives, &negsets[i], tempo_bank, tau, true))
        .collect();
    let backward: Vec<AnchorTerm> = if symmetric {
        let plain: Vec<NegativeSet> = negsets
            .iter()
            .map(|ns| NegativeSet {
                batch_negs: ns.batch_negs.clone(),
                ..NegativeSet::default()
            })
            .collect();
        (0..n)
            .into_par_iter()
            .map(|i| anchor_term(i, positives.row(i), anchors, &plain[i], tempo_bank, tau, true))
            .collect()
    } else {
        Vec::new()
    };

    let d = anchors.cols();
    let weight = if symmetric { 0.5 / n as f64 } else { 1.0 / n as f64 };
    let mut grad_anchors = Matrix::zeros(n, d);
    let mut grad_positives = Matrix::zeros(n, d);
    let mut per_anchor = Vec::with_capacity(n);
    let mut grad_jitter = Vec::with_capacity(n);
    for (i, term) in forward.iter().enumerate() {
        per_anchor.push(term.loss);
        grad_jitter.push(term.grad_jitter.iter().map(|g| g.iter().map(|v| weight * v).collect()).collect());
        accumulate(grad_anchors.row_mut(i), &term.grad_anchor, weight);
        for (j, g) in &term.grad_motion {
            accumulate(grad_positives.row_mut(*j), g, weight);
        }
    }
    for (i, term) in backward.iter().enumerate() {
        per_anchor[i] = 0.5 * (per_anchor[i] + term.loss);
        accumulate(grad_positives.row_mut(i), &term.grad_anchor, weight);
        for (j, g) in &term.grad_motion {
            accumulate(grad_anchors.row_mut(*j), g, weight);
        }
    }
    let value = per_anchor.iter().sum::<f64>() / n as f64;
    Ok(EclResult {
        value,
        per_anchor,
        grad_anchors,
        grad_positives,
        grad_jitter,
    })
}

/// Every other batch row, for each anchor.
pub fn in_batch_negatives(n: usize) -> Vec<NegativeSet> {
    (0..n)
        .map(|i| NegativeSet {
            batch_negs: (0..n).filter(|&j| j != i).collect(),
            ..NegativeSet::default()
        })
        .collect()
}

fn accumulate(dst: &mut [f64], src: &[f64], w: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += w * s;
    }
}
