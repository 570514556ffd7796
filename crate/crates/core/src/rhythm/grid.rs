use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant-tempo beat grid shared by the audio and motion streams of a clip.
///
/// Bars are read cyclically: bar `j` covers beats `(phase_offset + j*B + i) mod K`
/// for `i in 0..B`, so a grid whose beat count is a multiple of `B` always holds
/// complete bars regardless of where the first downbeat falls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatGrid {
    pub bpm: f64,
    pub bar_len: usize,
    pub num_beats: usize,
    pub beat_boundaries: Vec<f64>,
    /// Beat index of the first downbeat, in `[0, bar_len)`.
    pub phase_offset: usize,
}

pub fn build_beat_grid(
    bpm: f64,
    bar_len: usize,
    num_beats: usize,
    phase_offset: usize,
) -> Result<BeatGrid> {
    if !(bpm.is_finite() && bpm > 0.0) {
        return Err(Error::domain(format!("bpm must be positive, got {bpm}")));
    }
    if bar_len == 0 {
        return Err(Error::domain("bar length must be at least 1"));
    }
    if num_beats == 0 {
        return Err(Error::domain("beat count must be at least 1"));
    }
    if phase_offset >= bar_len {
        return Err(Error::domain(format!(
            "phase offset {phase_offset} outside [0, {bar_len})"
        )));
    }
    let period = 60.0 / bpm;
    let beat_boundaries = (0..=num_beats).map(|i| i as f64 * period).collect();
    Ok(BeatGrid {
        bpm,
        bar_len,
        num_beats,
        beat_boundaries,
        phase_offset,
    })
}

impl BeatGrid {
    pub fn beat_period(&self) -> f64 {
        60.0 / self.bpm
    }

    pub fn duration(&self) -> f64 {
        *self.beat_boundaries.last().unwrap_or(&0.0)
    }

    /// Position of beat `t` inside its bar, `0` on downbeats.
    pub fn bar_position(&self, t: usize) -> usize {
        (t + self.bar_len - self.phase_offset % self.bar_len) % self.bar_len
    }

    /// Bar phase angle of beat `t`, anchored so downbeats sit at zero.
    pub fn phase(&self, t: usize) -> f64 {
        crate::model::attention::bar_phase(self.bar_position(t), self.bar_len)
    }

    pub fn num_bars(&self) -> usize {
        self.num_beats / self.bar_len
    }

    pub fn has_complete_bars(&self) -> bool {
        self.num_beats % self.bar_len == 0
    }

    /// Beat indices of bar `j`, downbeat first.
    pub fn bar_beats(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        let start = self.phase_offset + j * self.bar_len;
        (0..self.bar_len).map(move |i| (start + i) % self.num_beats)
    }

    /// Midpoint of beat `t` in seconds.
    pub fn beat_center(&self, t: usize) -> f64 {
        0.5 * (self.beat_boundaries[t] + self.beat_boundaries[t + 1])
    }

    /// Checks the structural invariants, used when grids come from files.
    pub fn validate(&self) -> Result<()> {
        if self.beat_boundaries.len() != self.num_beats + 1 {
            return Err(Error::domain(format!(
                "grid has {} boundaries for {} beats",
                self.beat_boundaries.len(),
                self.num_beats
            )));
        }
        if self.bar_len == 0 || self.phase_offset >= self.bar_len {
            return Err(Error::domain("phase offset outside the bar"));
        }
        let period = self.beat_period();
        for w in self.beat_boundaries.windows(2) {
            let gap = w[1] - w[0];
            if gap <= 0.0 || ((gap - period) / period).abs() > 1e-9 {
                return Err(Error::domain(format!(
                    "beat gap {gap} does not match period {period}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_120_bpm() {
        let g = build_beat_grid(120.0, 4, 8, 0).unwrap();
        let expect: Vec<f64> = (0..=8).map(|i| i as f64 * 0.5).collect();
        assert_eq!(g.beat_boundaries, expect);
        assert_eq!(g.beat_boundaries[8], 4.0);
    }

    #[test]
    fn single_beat_grid() {
        let g = build_beat_grid(60.0, 1, 1, 0).unwrap();
        assert_eq!(g.beat_boundaries, vec![0.0, 1.0]);
    }

    #[test]
    fn offset_grid() {
        let g = build_beat_grid(100.0, 4, 16, 2).unwrap();
        assert_eq!(g.beat_boundaries.len(), 17);
        for w in g.beat_boundaries.windows(2) {
            assert!((w[1] - w[0] - 0.6).abs() < 1e-12);
        }
        assert_eq!(g.bar_position(2), 0);
        assert_eq!(g.bar_position(0), 2);
        assert_eq!(g.bar_beats(0).collect::<Vec<_>>(), vec![2, 3, 4, 5]);
        assert_eq!(g.bar_beats(3).collect::<Vec<_>>(), vec![14, 15, 0, 1]);
        g.validate().unwrap();
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_beat_grid(0.0, 4, 8, 0).is_err());
        assert!(build_beat_grid(-5.0, 4, 8, 0).is_err());
        assert!(build_beat_grid(120.0, 0, 8, 0).is_err());
        assert!(build_beat_grid(120.0, 4, 0, 0).is_err());
        assert!(build_beat_grid(120.0, 4, 8, 4).is_err());
    }
}
