use crate::error::{Error, Result};
use crate::rhythm::grid::BeatGrid;
use crate::tensor::Matrix;

/// Assigns each frame to the beat whose half-open interval contains its
/// timestamp. Frames before the first or after the last boundary are dropped.
pub(crate) fn assign_frames(frame_times: &[f64], grid: &BeatGrid) -> Result<Vec<Vec<usize>>> {
    if frame_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("frame timestamps must be non-decreasing"));
    }
    let bounds = &grid.beat_boundaries;
    let mut buckets = vec![Vec::new(); grid.num_beats];
    let mut beat = 0;
    for (i, &t) in frame_times.iter().enumerate() {
        if t < bounds[0] {
            continue;
        }
        while beat < grid.num_beats && t >= bounds[beat + 1] {
            beat += 1;
        }
        if beat == grid.num_beats {
            break;
        }
        buckets[beat].push(i);
    }
    if let Some(beat) = buckets.iter().position(Vec::is_empty) {
        return Err(Error::EmptyBeat { beat });
    }
    Ok(buckets)
}

fn check_rows(frames: &Matrix, frame_times: &[f64]) -> Result<()> {
    if frames.rows() != frame_times.len() {
        return Err(Error::shape(
            "frame_times",
            format!("{} timestamps", frames.rows()),
            frame_times.len(),
        ));
    }
    Ok(())
}

/// Subtracts each column's mean over the clip, leaving per-beat variation.
pub fn center_columns(tokens: &mut Matrix) {
    let rows = tokens.rows();
    if rows == 0 {
        return;
    }
    for c in 0..tokens.cols() {
        let mean = tokens.column(c).iter().sum::<f64>() / rows as f64;
        for r in 0..rows {
            let v = tokens.get(r, c) - mean;
            tokens.set(r, c, v);
        }
    }
}

/// Average-pools frame features into one row per beat.
pub fn pool_per_beat(frames: &Matrix, frame_times: &[f64], grid: &BeatGrid) -> Result<Matrix> {
    check_rows(frames, frame_times)?;
    let buckets = assign_frames(frame_times, grid)?;
    let mut out = Matrix::zeros(grid.num_beats, frames.cols());
    for (t, idx) in buckets.iter().enumerate() {
        let row = out.row_mut(t);
        for &i in idx {
            for (o, v) in row.iter_mut().zip(frames.row(i)) {
                *o += v;
            }
        }
        let n = idx.len() as f64;
        row.iter_mut().for_each(|o| *o /= n);
    }
    Ok(out)
}

/// Half-wave-rectified spectral flux per frame; the first frame has no predecessor and scores zero.
pub fn spectral_flux(frames: &Matrix) -> Vec<f64> {
    let mut flux = vec![0.0; frames.rows()];
    for f in 1..frames.rows() {
        flux[f] = frames
            .row(f)
            .iter()
            .zip(frames.row(f - 1))
            .map(|(cur, prev)| (cur - prev).max(0.0))
            .sum();
    }
    flux
}

/// Spectral-flux onset strength, max-pooled within each beat.
pub fn onset_envelope_per_beat(
    frames: &Matrix,
    frame_times: &[f64],
    grid: &BeatGrid,
) -> Result<Vec<f64>> {
    check_rows(frames, frame_times)?;
    let buckets = assign_frames(frame_times, grid)?;
    let flux = spectral_flux(frames);
    Ok(buckets
        .iter()
        .map(|idx| idx.iter().map(|&i| flux[i]).fold(0.0, f64::max))
        .collect())
}
