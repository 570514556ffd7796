//! Rhythm-aware negative mining: tempo-matched clips with a different bar
//! structure, and the anchor's own motion shifted by one beat.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DualEncoder;
use crate::rhythm::annotation::{beat_shift, TokenSequence};
use crate::rhythm::synth::ClipMeta;

/// Negatives of one anchor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NegativeSet {
    /// Batch positions whose motion embeddings act as negatives.
    pub batch_negs: Vec<usize>,
    /// Rows of the tempo bank.
    pub tempo_negs: Vec<usize>,
    /// Motion embeddings of the anchor's clip shifted by +1 and -1 beat.
    pub jitter_negs: Vec<Vec<f64>>,
}

impl NegativeSet {
    pub fn len(&self) -> usize {
        self.batch_negs.len() + self.tempo_negs.len() + self.jitter_negs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeConfig {
    #[serde(default = "default_true")]
    pub in_batch: bool,
    #[serde(default = "default_tempo_count")]
    pub tempo_count: usize,
    /// Relative BPM tolerance for tempo negatives.
    #[serde(default = "default_bpm_tol")]
    pub bpm_tol: f64,
    #[serde(default = "default_true")]
    pub jitter: bool,
    /// Backpropagate through the jitter embeddings instead of treating them
    /// as constants.
    #[serde(default = "default_true")]
    pub jitter_grad: bool,
}

fn default_true() -> bool {
    true
}
fn default_tempo_count() -> usize {
    4
}
fn default_bpm_tol() -> f64 {
    0.05
}

impl Default for NegativeConfig {
    fn default() -> Self {
        Self {
            in_batch: true,
            tempo_count: default_tempo_count(),
            bpm_tol: default_bpm_tol(),
            jitter: true,
            jitter_grad: true,
        }
    }
}

impl NegativeConfig {
    /// In-batch negatives only.
    pub fn in_batch_only() -> Self {
        Self {
            tempo_count: 0,
            jitter: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bpm_tol >= 0.0 && self.bpm_tol.is_finite()) {
            return Err(Error::Config(format!("bpm_tol must be nonnegative, got {}", self.bpm_tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TempoMining {
    pub indices: Vec<usize>,
    /// How many requested negatives the pool could not supply.
    pub shortfall: usize,
}

/// Clips within `bpm_tol` relative tempo of the anchor whose downbeat offset or
/// accent pattern differs. `exclude` lists pool indices that must not be
/// returned (the anchor's own clip, clips already in the batch). A seeded
/// shuffle picks among surplus candidates.
pub fn mine_tempo_negatives(
    anchor: &ClipMeta,
    pool: &[ClipMeta],
    exclude: &[usize],
    count: usize,
    bpm_tol: f64,
    seed: u64,
) -> TempoMining {
    let mut candidates: Vec<usize> = pool
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            !exclude.contains(i)
                && (c.bpm - anchor.bpm).abs() <= bpm_tol * anchor.bpm
                && (c.phase_offset != anchor.phase_offset || c.accent_pattern != anchor.accent_pattern)
        })
        .map(|(i, _)| i)
        .collect();
    if candidates.len() > count {
        candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        candidates.truncate(count);
        candidates.sort_unstable();
    }
    TempoMining {
        shortfall: count - candidates.len(),
        indices: candidates,
    }
}

/// Embeddings of the anchor motion shifted by +1 and -1 beat. These are
/// plain values: no gradient flows back into them.
pub fn make_beat_jitter_negatives(anchor_motion: &TokenSequence, model: &DualEncoder) -> Result<[Vec<f64>; 2]> {
    if anchor_motion.num_beats() < 2 {
        return Err(Error::domain("beat jitter needs at least two beats"));
    }
    let plus = model.encode_motion(&beat_shift(anchor_motion, 1)?)?.z;
    let minus = model.encode_motion(&beat_shift(anchor_motion, -1)?)?.z;
    Ok([plus, minus])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(bpm: f64, phase_offset: usize, accents: [f64; 4]) -> ClipMeta {
        ClipMeta {
            bpm,
            phase_offset,
            accent_pattern: accents.to_vec(),
            accent_beats: vec![],
            contact_beats: vec![],
        }
    }

    #[test]
    fn identical_structure_is_never_a_tempo_negative() {
        let anchor = meta(120.0, 1, [1.0, 0.5, 0.5, 0.5]);
        let pool = vec![anchor.clone(); 5];
        let got = mine_tempo_negatives(&anchor, &pool, &[], 4, 0.05, 0);
        assert!(got.indices.is_empty());
        assert_eq!(got.shortfall, 4);
    }

    #[test]
    fn respects_tolerance_and_shortfall() {
        let anchor = meta(120.0, 0, [1.0, 0.0, 0.0, 0.0]);
        let pool = vec![
            meta(113.0, 1, [1.0; 4]),
            meta(114.0, 1, [1.0; 4]),
            meta(126.0, 2, [1.0; 4]),
            meta(127.0, 3, [1.0; 4]),
            meta(120.0, 0, [0.5; 4]),
            meta(120.0, 0, [1.0, 0.0, 0.0, 0.0]),
        ];
        let got = mine_tempo_negatives(&anchor, &pool, &[], 8, 0.05, 3);
        assert_eq!(got.indices, vec![1, 2, 4]);
        assert_eq!(got.shortfall, 5);
        let got = mine_tempo_negatives(&anchor, &pool, &[2], 8, 0.05, 3);
        assert_eq!(got.indices, vec![1, 4]);
    }
}
