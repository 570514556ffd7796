//! Beat alignment score between music beats and motion beats.

use crate::error::{Error, Result};
use crate::rhythm::grid::BeatGrid;

pub const DEFAULT_SIGMA: f64 = 0.1;

/// Mean over music beats of `exp(-d^2 / (2 sigma^2))`, with `d` the distance to
/// the nearest motion beat. Times in seconds.
pub fn beat_alignment_score(music_beats: &[f64], motion_beats: &[f64], sigma: f64) -> Result<f64> {
    if music_beats.is_empty() || motion_beats.is_empty() {
        return Err(Error::domain("beat alignment needs at least one beat in each list"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let total: f64 = music_beats
        .iter()
        .map(|&t| {
            let d = motion_beats.iter().map(|&m| (t - m).abs()).fold(f64::INFINITY, f64::min);
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .sum();
    Ok(total / music_beats.len() as f64)
}

/// Centres of beats where `signal` has a local maximum of at least
/// `threshold` times its peak.
pub fn rhythm_event_times(signal: &[f64], grid: &BeatGrid, threshold: f64) -> Vec<f64> {
    let peak = signal.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    let k = signal.len();
    (0..k)
        .filter(|&t| {
            let left = if t > 0 { signal[t - 1] } else { f64::NEG_INFINITY };
            let right = if t + 1 < k { signal[t + 1] } else { f64::NEG_INFINITY };
            signal[t] >= threshold * peak && signal[t] >= left && signal[t] > right
        })
        .map(|t| grid.beat_center(t))
        .collect()
}
