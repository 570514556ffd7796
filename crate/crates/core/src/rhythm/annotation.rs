use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rhythm::grid::BeatGrid;
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Motion,
}

/// Per-beat rhythm signals of a clip plus their within-bar distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhythmAnnotation {
    /// Audio onset strength per beat.
    pub onset_envelope: Vec<f64>,
    /// Contact probability per beat, in `[0, 1]`.
    pub contact_pulse: Vec<f64>,
    /// Raw accent strength per beat; source of `bar_accent_mass`.
    pub accent: Vec<f64>,
    /// Raw kinetic energy per beat; source of `bar_energy_mass`.
    pub energy: Vec<f64>,
    pub bar_accent_mass: Vec<Vec<f64>>,
    pub bar_energy_mass: Vec<Vec<f64>>,
}

impl RhythmAnnotation {
    pub fn new(
        onset_envelope: Vec<f64>,
        contact_pulse: Vec<f64>,
        accent: Vec<f64>,
        energy: Vec<f64>,
        grid: &BeatGrid,
    ) -> Result<Self> {
        let k = grid.num_beats;
        for (name, v) in [
            ("onset_envelope", &onset_envelope),
            ("contact_pulse", &contact_pulse),
            ("accent", &accent),
            ("energy", &energy),
        ] {
            if v.len() != k {
                return Err(Error::shape(name, k, v.len()));
            }
        }
        if onset_envelope.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain("onset envelope must be finite and nonnegative"));
        }
        if contact_pulse.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::domain("contact pulse must lie in [0, 1]"));
        }
        let bar_accent_mass = bar_mass(&accent, grid)?;
        let bar_energy_mass = bar_mass(&energy, grid)?;
        Ok(Self {
            onset_envelope,
            contact_pulse,
            accent,
            energy,
            bar_accent_mass,
            bar_energy_mass,
        })
    }

    fn shifted(&self, delta: i64, grid: &BeatGrid) -> Result<Self> {
        Self::new(
            rotate(&self.onset_envelope, delta),
            rotate(&self.contact_pulse, delta),
            rotate(&self.accent, delta),
            rotate(&self.energy, delta),
            grid,
        )
    }
}

/// Beat tokens of one modality for one clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub modality: Modality,
    pub tokens: Matrix,
    pub grid: BeatGrid,
    pub annotation: RhythmAnnotation,
}

impl TokenSequence {
    pub fn new(
        modality: Modality,
        tokens: Matrix,
        grid: BeatGrid,
        annotation: RhythmAnnotation,
    ) -> Result<Self> {
        if tokens.rows() != grid.num_beats {
            return Err(Error::shape("tokens", format!("{} rows", grid.num_beats), tokens.rows()));
        }
        if !tokens.is_finite() {
            return Err(Error::domain("tokens contain non-finite entries"));
        }
        Ok(Self {
            modality,
            tokens,
            grid,
            annotation,
        })
    }

    pub fn num_beats(&self) -> usize {
        self.grid.num_beats
    }

    pub fn dim(&self) -> usize {
        self.tokens.cols()
    }
}

/// Normalizes each bar of per-beat values into a distribution over bar
/// positions (downbeat first). Bars with zero total mass become uniform.
pub fn bar_mass(values: &[f64], grid: &BeatGrid) -> Result<Vec<Vec<f64>>> {
    check_bar_input(values, grid)?;
    let b = grid.bar_len;
    Ok((0..grid.num_bars())
        .map(|j| {
            let bar: Vec<f64> = grid.bar_beats(j).map(|t| values[t]).collect();
            let sum: f64 = bar.iter().sum();
            if sum > 0.0 {
                bar.iter().map(|v| v / sum).collect()
            } else {
                vec![1.0 / b as f64; b]
            }
        })
        .collect())
}

/// Pulls a gradient with respect to `bar_mass(values)` back onto `values`.
/// Zero-mass bars use the constant fallback and receive no gradient.
pub fn bar_mass_backward(values: &[f64], grid: &BeatGrid, grad_mass: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_bar_input(values, grid)?;
    if grad_mass.len() != grid.num_bars() {
        return Err(Error::shape("bar mass gradient", grid.num_bars(), grad_mass.len()));
    }
    let mut grad = vec![0.0; values.len()];
    for (j, g) in grad_mass.iter().enumerate() {
        let beats: Vec<usize> = grid.bar_beats(j).collect();
        let sum: f64 = beats.iter().map(|&t| values[t]).sum();
        if sum <= 0.0 {
            continue;
        }
        // d(x_i / S)/dx_k = (delta_ik - p_i) / S
        let weighted: f64 = beats.iter().zip(g).map(|(&t, gi)| gi * values[t] / sum).sum();
        for (&t, gi) in beats.iter().zip(g) {
            grad[t] += (gi - weighted) / sum;
        }
    }
    Ok(grad)
}

fn check_bar_input(values: &[f64], grid: &BeatGrid) -> Result<()> {
    if values.len() != grid.num_beats {
        return Err(Error::shape("per-beat values", grid.num_beats, values.len()));
    }
    if !grid.has_complete_bars() {
        return Err(Error::domain(format!(
            "{} beats do not split into bars of {}",
            grid.num_beats, grid.bar_len
        )));
    }
    if values.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::domain("bar mass inputs must be nonnegative"));
    }
    Ok(())
}

/// `out[t] = v[(t - delta) mod K]`.
pub(crate) fn rotate<T: Clone>(v: &[T], delta: i64) -> Vec<T> {
    let k = v.len() as i64;
    (0..k)
        .map(|t| v[(t - delta).rem_euclid(k) as usize].clone())
        .collect()
}

/// Circularly shifts tokens and every per-beat annotation by `delta` beats,
/// keeping the grid fixed.
pub fn beat_shift(seq: &TokenSequence, delta: i64) -> Result<TokenSequence> {
    let k = seq.num_beats() as i64;
    if delta.abs() >= k {
        return Err(Error::domain(format!("shift {delta} must satisfy |delta| < {k}")));
    }
    let rows = rotate(&seq.tokens.to_rows(), delta);
    Ok(TokenSequence {
        modality: seq.modality,
        tokens: Matrix::from_rows(&rows)?,
        grid: seq.grid.clone(),
        annotation: seq.annotation.shifted(delta, &seq.grid)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rhythm::grid::build_beat_grid;

    fn one_bar() -> BeatGrid {
        build_beat_grid(120.0, 4, 4, 0).unwrap()
    }

    #[test]
    fn bar_mass_examples() {
        let g = one_bar();
        assert_eq!(bar_mass(&[2., 0., 0., 0.], &g).unwrap(), vec![vec![1., 0., 0., 0.]]);
        assert_eq!(bar_mass(&[0.; 4], &g).unwrap(), vec![vec![0.25; 4]]);
        let m = bar_mass(&[1., 2., 3., 4.], &g).unwrap();
        for (a, b) in m[0].iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn bar_mass_follows_downbeat() {
        let g = build_beat_grid(120.0, 4, 8, 1).unwrap();
        let m = bar_mass(&[8., 1., 0., 0., 0., 1., 0., 0.], &g).unwrap();
        assert_eq!(m[0], vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m[1], vec![1.0 / 9.0, 0.0, 0.0, 8.0 / 9.0]);
    }

    #[test]
    fn bar_mass_rejects_incomplete_bars() {
        let g = build_beat_grid(120.0, 4, 6, 0).unwrap();
        assert!(bar_mass(&[1.0; 6], &g).is_err());
    }

    #[test]
    fn bar_mass_backward_matches_finite_differences() {
        let g = build_beat_grid(120.0, 4, 8, 2).unwrap();
        let x = [0.3, 1.2, 0.7, 0.1, 0.9, 0.4, 2.0, 0.5];
        let w: Vec<Vec<f64>> = vec![vec![0.3, -1.0, 0.5, 2.0], vec![-0.2, 0.1, 0.7, -0.4]];
        let f = |x: &[f64]| -> f64 {
            bar_mass(x, &g)
                .unwrap()
                .iter()
                .zip(&w)
                .map(|(m, w)| m.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        };
        let grad = bar_mass_backward(&x, &g, &w).unwrap();
        let h = 1e-6;
        for i in 0..8 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-8, "beat {i}: {fd} vs {}", grad[i]);
        }
    }
}
