//! Log-mel spectrogram front end for audio tokens.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Floor added before the logarithm.
pub const LOG_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StftConfig {
    pub window: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window: 1024,
            hop: 256,
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// The `n_mels + 2` corner frequencies (Hz) of the triangular filters. Filter `m`
/// rises from `edges[m]`, peaks at `edges[m + 1]` and falls to zero at `edges[m + 2]`.
pub fn mel_band_edges(n_mels: usize, sample_rate: f64) -> Vec<f64> {
    let top = hz_to_mel(sample_rate / 2.0);
    (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Sparse triangular filterbank over the one-sided FFT bins.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    filters: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: f64) -> Self {
        let edges = mel_band_edges(n_mels, sample_rate);
        let n_bins = n_fft / 2 + 1;
        let bin_hz = sample_rate / n_fft as f64;
        let filters = (0..n_mels)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let mut start = None;
                let mut weights = Vec::new();
                for k in 0..n_bins {
                    let f = k as f64 * bin_hz;
                    let w = if f > lo && f < hi {
                        if f <= mid {
                            (f - lo) / (mid - lo)
                        } else {
                            (hi - f) / (hi - mid)
                        }
                    } else {
                        0.0
                    };
                    if w > 0.0 {
                        start.get_or_insert(k);
                        weights.push(w);
                    } else if start.is_some() {
                        break;
                    }
                }
                (start.unwrap_or(0), weights)
            })
            .collect();
        Self { filters }
    }

    pub fn num_bands(&self) -> usize {
        self.filters.len()
    }

    fn apply(&self, spectrum: &[f64], out: &mut [f64]) {
        for ((start, w), o) in self.filters.iter().zip(out.iter_mut()) {
            *o = w
                .iter()
                .zip(&spectrum[*start..])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
}

pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

pub fn num_frames(num_samples: usize, cfg: StftConfig) -> usize {
    if num_samples < cfg.window {
        0
    } else {
        1 + (num_samples - cfg.window) / cfg.hop
    }
}

/// Timestamp (seconds) of each analysis frame, taken at the window centre.
pub fn frame_times(n_frames: usize, sample_rate: f64, cfg: StftConfig) -> Vec<f64> {
    (0..n_frames)
        .map(|i| (i * cfg.hop + cfg.window / 2) as f64 / sample_rate)
        .collect()
}

pub fn log_mel_spectrogram(samples: &[f64], sample_rate: f64, n_mels: usize) -> Result<Matrix> {
    log_mel_spectrogram_with(samples, sample_rate, n_mels, StftConfig::default())
}

/// Magnitude STFT (Hann window) through a triangular mel filterbank, then
/// `ln(x + 1e-6)`. Returns a `frames x n_mels` matrix.
pub fn log_mel_spectrogram_with(
    samples: &[f64],
    sample_rate: f64,
    n_mels: usize,
    cfg: StftConfig,
) -> Result<Matrix> {
    if samples.is_empty() {
        return Err(Error::domain("empty audio input"));
    }
    if n_mels < 1 {
        return Err(Error::domain("n_mels must be at least 1"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::domain(format!("sample rate must be positive, got {sample_rate}")));
    }
    if cfg.window == 0 || cfg.hop == 0 {
        return Err(Error::domain("STFT window and hop must be positive"));
    }
    if samples.len() < cfg.window {
        return Err(Error::domain(format!(
            "{} samples is shorter than one {}-sample window",
            samples.len(),
            cfg.window
        )));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("non-finite audio sample"));
    }

    let n_frames = num_frames(samples.len(), cfg);
    let window = hann(cfg.window);
    let bank = MelFilterbank::new(n_mels, cfg.window, sample_rate);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.window);
    let n_bins = cfg.window / 2 + 1;

    let mut out = Matrix::zeros(n_frames, n_mels);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.window];
    let mut mag = vec![0.0; n_bins];
    for f in 0..n_frames {
        let offset = f * cfg.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(samples[offset + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (m, b) in mag.iter_mut().zip(&buf) {
            *m = b.norm();
        }
        let row = out.row_mut(f);
        bank.apply(&mag, row);
        for v in row.iter_mut() {
            *v = (*v + LOG_EPS).ln();
        }
    }
    Ok(out)
}
