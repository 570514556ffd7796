//! Full training objective over a batch of clip pairs, with parameter
//! gradients for both encoders.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DualEncoder, EncoderParams, EncoderTrace};
use crate::objectives::ecl::ecl_loss;
use crate::objectives::negatives::{make_beat_jitter_negatives, mine_tempo_negatives, NegativeConfig, NegativeSet};
use crate::objectives::sral::{sral_loss, total_loss, LossWeights};
use crate::rhythm::annotation::{bar_mass, bar_mass_backward, beat_shift, TokenSequence};
use crate::rhythm::synth::{ClipMeta, ClipPair};
use crate::tensor::Matrix;

/// Which signals the rhythm alignment loss compares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SralSource {
    /// Predicted onset envelope against predicted contact pulse; the accent
    /// distribution comes from the predicted onsets and the energy
    /// distribution from the annotation.
    #[default]
    Pred,
    /// Annotated signals only; contributes to the loss value but not to
    /// gradients.
    Gt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default)]
    pub negatives: NegativeConfig,
    #[serde(default)]
    pub sral_source: SralSource,
    /// Weight of each rhythm-head supervision loss.
    #[serde(default = "default_aux")]
    pub aux_weight: f64,
    #[serde(default)]
    pub symmetric: bool,
}

fn default_aux() -> f64 {
    0.1
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            negatives: NegativeConfig::default(),
            sral_source: SralSource::Pred,
            aux_weight: default_aux(),
            symmetric: false,
        }
    }
}

impl ObjectiveConfig {
    /// In-batch negatives, no rhythm alignment term.
    pub fn random_negatives_only() -> Self {
        Self {
            weights: LossWeights {
                alpha: 0.0,
                ..LossWeights::default()
            },
            negatives: NegativeConfig::in_batch_only(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.negatives.validate()?;
        if !(self.aux_weight >= 0.0 && self.aux_weight.is_finite()) {
            return Err(Error::Config(format!("aux_weight must be nonnegative, got {}", self.aux_weight)));
        }
        Ok(())
    }
}

/// Loss components whose gradients are accumulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Terms {
    pub ecl: bool,
    pub sral: bool,
    pub aux: bool,
}

impl Terms {
    pub const ALL: Terms = Terms {
        ecl: true,
        sral: true,
        aux: true,
    };
}

/// Precomputed negatives for one batch. Everything here is a constant with
/// respect to the parameters. When jitter negatives carry gradient they are
/// left empty here and encoded inside [`batch_objective`].
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNegatives {
    pub sets: Vec<NegativeSet>,
    pub tempo_bank: Matrix,
    /// Total tempo negatives requested but unavailable.
    pub tempo_shortfall: usize,
}

/// Source of tempo negatives: metadata and motion tokens of a pool (usually
/// the training split).
#[derive(Clone, Copy, Debug)]
pub struct TempoPool<'a> {
    pub metas: &'a [ClipMeta],
    pub motions: &'a [&'a TokenSequence],
}

/// Builds negatives for a batch. `pool_ids[i]` is batch clip `i`'s index in
/// the tempo pool, so clips in the batch are never mined as tempo negatives.
/// Mined clips are encoded with the current parameters; the bank holds one
/// row per distinct mined clip.
pub fn prepare_negatives(
    model: &DualEncoder,
    batch: &[&ClipPair],
    pool_ids: &[usize],
    tempo: Option<TempoPool<'_>>,
    cfg: &NegativeConfig,
    seed: u64,
) -> Result<BatchNegatives> {
    let n = batch.len();
    if let Some(pool) = tempo {
        if pool.metas.len() != pool.motions.len() {
            return Err(Error::shape("tempo pool motions", pool.metas.len(), pool.motions.len()));
        }
    }
    let jitter: Vec<Vec<Vec<f64>>> = if cfg.jitter && !cfg.jitter_grad {
        batch
            .par_iter()
            .map(|p| make_beat_jitter_negatives(&p.motion, model).map(|[a, b]| vec![a, b]))
            .collect::<Result<_>>()?
    } else {
        vec![Vec::new(); n]
    };

    let mut shortfall = 0;
    let mut mined = Vec::with_capacity(n);
    for (i, pair) in batch.iter().enumerate() {
        let picks = match tempo {
            Some(pool) if cfg.tempo_count > 0 => {
                let m = mine_tempo_negatives(
                    &pair.meta,
                    pool.metas,
                    pool_ids,
                    cfg.tempo_count,
                    cfg.bpm_tol,
                    seed.wrapping_add(i as u64),
                );
                shortfall += m.shortfall;
                m.indices
            }
            _ => Vec::new(),
        };
        mined.push(picks);
    }

    let mut used: Vec<usize> = mined.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let tempo_bank = match tempo {
        Some(pool) if !used.is_empty() => {
            let rows: Vec<Vec<f64>> = used
                .par_iter()
                .map(|&k| Ok(model.encode_motion(pool.motions[k])?.z))
                .collect::<Result<_>>()?;
            Matrix::from_rows(&rows)?
        }
        _ => Matrix::zeros(0, model.embed_dim()),
    };

    let sets = mined
        .into_iter()
        .zip(jitter)
        .enumerate()
        .map(|(i, (picks, jitter_negs))| NegativeSet {
            batch_negs: if cfg.in_batch {
                (0..n).filter(|&j| j != i).collect()
            } else {
                Vec::new()
            },
            tempo_negs: picks
                .iter()
                .map(|k| used.binary_search(k).expect("mined index is in the bank"))
                .collect(),
            jitter_negs,
        })
        .collect();
    Ok(BatchNegatives {
        sets,
        tempo_bank,
        tempo_shortfall: shortfall,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchLoss {
    /// `ecl + alpha * sral + aux_weight * aux`.
    pub total: f64,
    pub ecl: f64,
    pub sral: f64,
    pub sral_beat: f64,
    pub sral_bar: f64,
    /// Onset MSE plus contact BCE, batch mean.
    pub aux: f64,
    pub grad_audio: EncoderParams,
    pub grad_motion: EncoderParams,
}

const BCE_CLAMP: f64 = 1e-7;

/// Mean squared error and its gradient.
fn mse(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let k = pred.len() as f64;
    let value = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / k;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / k).collect();
    (value, grad)
}

/// Binary cross-entropy against soft targets and its gradient.
fn bce(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let k = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &y) in pred.iter().zip(target) {
        let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        value -= (y * p.ln() + (1.0 - y) * (1.0 - p).ln()) / k;
        grad.push((p - y) / (p * (1.0 - p)) / k);
    }
    (value, grad)
}

struct ClipTerms {
    sral: f64,
    beat: f64,
    bar: f64,
    aux: f64,
    grad_onset: Vec<f64>,
    grad_contact: Vec<f64>,
}

fn clip_terms(
    pair: &ClipPair,
    onset: &[f64],
    contact: &[f64],
    cfg: &ObjectiveConfig,
    terms: Terms,
    n: f64,
) -> Result<ClipTerms> {
    let k = onset.len();
    let ann = &pair.motion.annotation;
    let grid = &pair.audio.grid;
    let mut grad_onset = vec![0.0; k];
    let mut grad_contact = vec![0.0; k];

    let alpha = cfg.weights.alpha;
    let (sral, beat, bar) = match cfg.sral_source {
        SralSource::Gt => {
            let a = &pair.audio.annotation;
            let r = sral_loss(
                &a.onset_envelope,
                &ann.contact_pulse,
                &a.bar_accent_mass,
                &ann.bar_energy_mass,
                &cfg.weights,
            )?;
            (r.value, r.beat_term, r.bar_term)
        }
        SralSource::Pred => {
            let accent_mass = bar_mass(onset, grid)?;
            let r = sral_loss(onset, contact, &accent_mass, &ann.bar_energy_mass, &cfg.weights)?;
            if terms.sral && alpha > 0.0 {
                let through_mass = bar_mass_backward(onset, grid, &r.grad_accent_mass)?;
                let w = alpha / n;
                for t in 0..k {
                    grad_onset[t] += w * (r.grad_onset[t] + through_mass[t]);
                    grad_contact[t] += w * r.grad_contact[t];
                }
            }
            (r.value, r.beat_term, r.bar_term)
        }
    };

    let (on_loss, on_grad) = mse(onset, &pair.audio.annotation.onset_envelope);
    let (c_loss, c_grad) = bce(contact, &ann.contact_pulse);
    if terms.aux && cfg.aux_weight > 0.0 {
        let w = cfg.aux_weight / n;
        for t in 0..k {
            grad_onset[t] += w * on_grad[t];
            grad_contact[t] += w * c_grad[t];
        }
    }
    Ok(ClipTerms {
        sral,
        beat,
        bar,
        aux: on_loss + c_loss,
        grad_onset,
        grad_contact,
    })
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// Forward and backward pass of the objective over one batch. Per-clip work
/// runs in parallel; gradients are summed in batch order.
pub fn batch_objective(
    model: &DualEncoder,
    batch: &[&ClipPair],
    negs: &BatchNegatives,
    cfg: &ObjectiveConfig,
    terms: Terms,
) -> Result<BatchLoss> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::domain("empty batch"));
    }
    if negs.sets.len() != n {
        return Err(Error::shape("negative sets", n, negs.sets.len()));
    }
    let traces: Vec<(EncoderTrace, EncoderTrace)> = batch
        .par_iter()
        .map(|p| Ok((model.trace_audio(&p.audio)?, model.trace_motion(&p.motion)?)))
        .collect::<Result<_>>()?;
    let outputs: Vec<_> = traces.iter().map(|(a, m)| (a.output(), m.output())).collect();

    let live_jitter = cfg.negatives.jitter && cfg.negatives.jitter_grad;
    let jitter_traces: Vec<Vec<EncoderTrace>> = if live_jitter {
        batch
            .par_iter()
            .map(|p| {
                [1, -1]
                    .iter()
                    .map(|&d| model.trace_motion(&beat_shift(&p.motion, d)?))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let live_sets: Vec<NegativeSet>;
    let sets = if live_jitter {
        live_sets = negs
            .sets
            .iter()
            .zip(&jitter_traces)
            .map(|(s, traces)| NegativeSet {
                jitter_negs: traces.iter().map(|t| t.graph.value(t.z).as_slice().to_vec()).collect(),
                ..s.clone()
            })
            .collect();
        &live_sets
    } else {
        &negs.sets
    };

    let za = Matrix::from_rows(&outputs.iter().map(|(a, _)| a.z.clone()).collect::<Vec<_>>())?;
    let zm = Matrix::from_rows(&outputs.iter().map(|(_, m)| m.z.clone()).collect::<Vec<_>>())?;
    let ecl = ecl_loss(&za, &zm, sets, &negs.tempo_bank, cfg.weights.tau, cfg.symmetric)?;

    let clips: Vec<ClipTerms> = batch
        .par_iter()
        .zip(&outputs)
        .map(|(p, (a, m))| clip_terms(p, &a.onset_pred, &m.contact_pred, cfg, terms, n as f64))
        .collect::<Result<_>>()?;

    let sral = mean(clips.iter().map(|c| c.sral), n);
    let aux = mean(clips.iter().map(|c| c.aux), n);
    let total = total_loss(ecl.value, sral, cfg.weights.alpha)? + cfg.aux_weight * aux;

    let zero = vec![0.0; model.embed_dim()];
    let grads: Vec<(EncoderParams, EncoderParams)> = traces
        .par_iter()
        .enumerate()
        .map(|(i, (ta, tm))| {
            let (gza, gzm) = if terms.ecl {
                (ecl.grad_anchors.row(i), ecl.grad_positives.row(i))
            } else {
                (zero.as_slice(), zero.as_slice())
            };
            let ga = ta.backward(&model.audio, Some(gza), Some(&clips[i].grad_onset), None);
            let mut gm = tm.backward(&model.motion, Some(gzm), None, Some(&clips[i].grad_contact));
            if terms.ecl {
                for (t, g) in jitter_traces.get(i).into_iter().flatten().zip(&ecl.grad_jitter[i]) {
                    gm.axpy(1.0, &t.backward(&model.motion, Some(g), None, None));
                }
            }
            (ga, gm)
        })
        .collect();
    let mut grad_audio = model.audio.zeros_like();
    let mut grad_motion = model.motion.zeros_like();
    for (ga, gm) in &grads {
        grad_audio.axpy(1.0, ga);
        grad_motion.axpy(1.0, gm);
    }

    Ok(BatchLoss {
        total,
        ecl: ecl.value,
        sral,
        sral_beat: mean(clips.iter().map(|c| c.beat), n),
        sral_bar: mean(clips.iter().map(|c| c.bar), n),
        aux,
        grad_audio,
        grad_motion,
    })
}

/// Loss value only, with the same negatives; used by finite-difference checks.
pub fn batch_loss_value(
    model: &DualEncoder,
    batch: &[&ClipPair],
    negs: &BatchNegatives,
    cfg: &ObjectiveConfig,
) -> Result<f64> {
    Ok(batch_objective(model, batch, negs, cfg, Terms::ALL)?.total)
}
