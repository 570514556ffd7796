//! Rhythm alignment loss: soft-DTW between the onset envelope and the contact
//! pulse, plus the mean per-bar EMD between accent and energy distributions.

use serde::{Deserialize, Serialize};

use crate::align::{emd_1d, soft_dtw, SoftDtwConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub tau: f64,
    pub lambda_beat: f64,
    pub lambda_bar: f64,
    pub alpha: f64,
    /// Soft-DTW smoothing.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    0.1
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            tau: 0.07,
            lambda_beat: 0.9,
            lambda_bar: 0.2,
            alpha: 0.2,
            gamma: default_gamma(),
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        for (name, w) in [
            ("lambda_beat", self.lambda_beat),
            ("lambda_bar", self.lambda_bar),
            ("alpha", self.alpha),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SralResult {
    pub value: f64,
    /// Unweighted soft-DTW term.
    pub beat_term: f64,
    /// Unweighted mean bar EMD.
    pub bar_term: f64,
    pub grad_onset: Vec<f64>,
    pub grad_contact: Vec<f64>,
    pub grad_accent_mass: Vec<Vec<f64>>,
    pub grad_energy_mass: Vec<Vec<f64>>,
}

pub fn sral_loss(
    onset: &[f64],
    contact: &[f64],
    accent_mass: &[Vec<f64>],
    energy_mass: &[Vec<f64>],
    weights: &LossWeights,
) -> Result<SralResult> {
    if accent_mass.len() != energy_mass.len() {
        return Err(Error::shape("energy_mass", accent_mass.len(), energy_mass.len()));
    }
    if accent_mass.is_empty() {
        return Err(Error::domain("rhythm alignment needs at least one bar"));
    }
    let dtw = soft_dtw(onset, contact, SoftDtwConfig { gamma: weights.gamma })?;
    let bars = accent_mass.len() as f64;
    let mut bar_term = 0.0;
    let mut grad_accent_mass = Vec::with_capacity(accent_mass.len());
    let mut grad_energy_mass = Vec::with_capacity(accent_mass.len());
    for (a, m) in accent_mass.iter().zip(energy_mass) {
        let fwd = emd_1d(a, m)?;
        let rev = emd_1d(m, a)?;
        bar_term += fwd.value / bars;
        let scale = weights.lambda_bar / bars;
        grad_accent_mass.push(fwd.grad_p.iter().map(|g| scale * g).collect());
        grad_energy_mass.push(rev.grad_p.iter().map(|g| scale * g).collect());
    }
    Ok(SralResult {
        value: weights.lambda_beat * dtw.value + weights.lambda_bar * bar_term,
        beat_term: dtw.value,
        bar_term,
        grad_onset: dtw.grad_a.iter().map(|g| weights.lambda_beat * g).collect(),
        grad_contact: dtw.grad_b.iter().map(|g| weights.lambda_beat * g).collect(),
        grad_accent_mass,
        grad_energy_mass,
    })
}

/// `ecl + alpha * sral`.
pub fn total_loss(ecl: f64, sral: f64, alpha: f64) -> Result<f64> {
    if !(ecl.is_finite() && sral.is_finite()) {
        return Err(Error::domain("loss terms must be finite"));
    }
    if !(alpha >= 0.0) {
        return Err(Error::domain(format!("alpha must be nonnegative, got {alpha}")));
    }
    Ok(ecl + alpha * sral)
}
