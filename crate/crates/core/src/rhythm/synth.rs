//! Seeded generator of rhythm-consistent audio/motion clip pairs.
//!
//! Each clip draws a tempo, a downbeat offset, its own accent weights around
//! the configured pattern and a set of accented beats from them. Audio gets a
//! decaying tone-plus-noise burst on every accented beat; motion gets a foot
//! stomp at the same beat displaced by a Gaussian timing lag. Both streams go
//! through the regular feature front ends (log-mel pooling and joint
//! kinematics), and each feature is centred over the clip.
//!
//! Annotations come from the latent event plan: onset envelope and contact
//! pulse mark event timing, accent and energy carry event strength. A lag-free
//! pair therefore has identical accent and energy distributions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rhythm::annotation::{Modality, RhythmAnnotation, TokenSequence};
use crate::rhythm::grid::{build_beat_grid, BeatGrid};
use crate::rhythm::kinematics::{motion_kinematics_per_beat, ContactHeuristic, Pose};
use crate::rhythm::pooling::{center_columns, pool_per_beat};
use crate::rhythm::spectrogram::{frame_times, log_mel_spectrogram_with, num_frames, StftConfig};
use crate::tensor::Matrix;

/// Width (in beats) of the kernel that spreads an event over neighbouring beats.
const EVENT_KERNEL_WIDTH: f64 = 0.25;
const TONE_HZ: f64 = 1000.0;
const SWAY: f64 = 0.1;
const HAND_RADIUS: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPairSpec {
    pub bpm_range: [f64; 2],
    pub bar_len: usize,
    pub num_beats: usize,
    /// Nonnegative weight per bar position; scaled to a peak of 1 and used as
    /// both hit probability and hit strength.
    pub accent_pattern: Vec<f64>,
    /// Log-normal spread of each pair's accent weights around
    /// `accent_pattern`; 0 gives every pair the same pattern.
    #[serde(default = "default_pattern_spread")]
    pub pattern_spread: f64,
    /// Standard deviation, in beats, of the contact timing lag.
    pub contact_lag_std: f64,
    pub feature_noise_std: f64,
    pub seed: u64,
    #[serde(default = "default_n_mels")]
    pub n_mels: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_fps")]
    pub motion_fps: f64,
}

fn default_pattern_spread() -> f64 {
    0.5
}
fn default_n_mels() -> usize {
    128
}
fn default_sample_rate() -> f64 {
    22050.0
}
fn default_fps() -> f64 {
    60.0
}

impl Default for SyntheticPairSpec {
    fn default() -> Self {
        Self {
            bpm_range: [96.0, 144.0],
            bar_len: 4,
            num_beats: 16,
            accent_pattern: vec![1.0, 0.4, 0.7, 0.4],
            pattern_spread: default_pattern_spread(),
            contact_lag_std: 0.05,
            feature_noise_std: 0.05,
            seed: 0,
            n_mels: default_n_mels(),
            sample_rate: default_sample_rate(),
            motion_fps: default_fps(),
        }
    }
}

impl SyntheticPairSpec {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.bpm_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("invalid bpm range [{lo}, {hi}]")));
        }
        if self.bar_len == 0 || self.num_beats == 0 {
            return Err(Error::Config("bar length and beat count must be positive".into()));
        }
        if self.num_beats % self.bar_len != 0 {
            return Err(Error::Config(format!(
                "{} beats do not split into bars of {}",
                self.num_beats, self.bar_len
            )));
        }
        if self.accent_pattern.len() != self.bar_len {
            return Err(Error::Config(format!(
                "accent pattern has {} weights for bars of {}",
                self.accent_pattern.len(),
                self.bar_len
            )));
        }
        if self.accent_pattern.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("accent weights must be finite and nonnegative".into()));
        }
        if !(self.contact_lag_std >= 0.0) || !(self.feature_noise_std >= 0.0) || !(self.pattern_spread >= 0.0) {
            return Err(Error::Config("spreads and noise levels must be nonnegative".into()));
        }
        if self.n_mels == 0 || !(self.sample_rate > 0.0) || !(self.motion_fps > 0.0) {
            return Err(Error::Config("n_mels, sample_rate and motion_fps must be positive".into()));
        }
        Ok(())
    }

    /// Spec for pair `index` of a dataset: same settings, seed `seed + index`.
    pub fn for_pair(&self, index: u64) -> Self {
        Self {
            seed: self.seed.wrapping_add(index),
            ..self.clone()
        }
    }
}

/// Clip-level metadata kept alongside the tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub bpm: f64,
    pub phase_offset: usize,
    /// Realized mean accent strength per bar position.
    pub accent_pattern: Vec<f64>,
    /// Audio event positions, in beats from clip start.
    pub accent_beats: Vec<f64>,
    /// Motion contact positions, in beats from clip start.
    pub contact_beats: Vec<f64>,
}

/// Rhythm events of one clip before rendering.
#[derive(Clone, Debug, PartialEq)]
pub struct EventPlan {
    pub grid: BeatGrid,
    pub strengths: Vec<f64>,
    pub accent_beats: Vec<f64>,
    pub contact_beats: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipPair {
    pub audio: TokenSequence,
    pub motion: TokenSequence,
    pub meta: ClipMeta,
}

/// Raw signals of a synthetic clip.
#[derive(Clone, Debug)]
pub struct SyntheticRecording {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub poses: Vec<Pose>,
    pub pose_times: Vec<f64>,
}

pub fn sample_event_plan(spec: &SyntheticPairSpec, rng: &mut ChaCha8Rng) -> Result<EventPlan> {
    spec.validate()?;
    let [lo, hi] = spec.bpm_range;
    let bpm = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let phase_offset = rng.random_range(0..spec.bar_len);
    let grid = build_beat_grid(bpm, spec.bar_len, spec.num_beats, phase_offset)?;

    let pattern: Vec<f64> = spec
        .accent_pattern
        .iter()
        .map(|&w| {
            let n: f64 = StandardNormal.sample(rng);
            w * (spec.pattern_spread * n).exp()
        })
        .collect();
    let peak = pattern.iter().cloned().fold(0.0, f64::max);
    let lag = Normal::new(0.0, spec.contact_lag_std).map_err(|e| Error::Config(e.to_string()))?;
    let mut strengths = Vec::new();
    let mut accent_beats = Vec::new();
    let mut contact_beats = Vec::new();
    for t in 0..spec.num_beats {
        let w = if peak > 0.0 {
            pattern[grid.bar_position(t)] / peak
        } else {
            0.0
        };
        let u: f64 = rng.random();
        let shift: f64 = lag.sample(rng);
        if u < w {
            let at = t as f64 + 0.5;
            strengths.push(w);
            accent_beats.push(at);
            contact_beats.push(at + shift);
        }
    }
    Ok(EventPlan {
        grid,
        strengths,
        accent_beats,
        contact_beats,
    })
}

fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

fn kernel(distance: f64) -> f64 {
    (-0.5 * (distance / EVENT_KERNEL_WIDTH).powi(2)).exp()
}

impl EventPlan {
    /// Event density at each beat centre, optionally weighted by event strength.
    fn density(&self, events: &[f64], weighted: bool) -> Vec<f64> {
        let k = self.grid.num_beats as f64;
        (0..self.grid.num_beats)
            .map(|t| {
                let c = t as f64 + 0.5;
                events
                    .iter()
                    .zip(&self.strengths)
                    .map(|(&e, &s)| {
                        let w = if weighted { s } else { 1.0 };
                        w * kernel(circular_distance(c, e, k))
                    })
                    .sum()
            })
            .collect()
    }

    /// Onset envelope and contact pulse mark event timing only; accent and
    /// energy carry event strength.
    pub fn annotation(&self) -> Result<RhythmAnnotation> {
        let pulse = |events: &[f64]| -> Vec<f64> { self.density(events, false).into_iter().map(|v| v.min(1.0)).collect() };
        let accent = self.density(&self.accent_beats, true);
        let energy = self.density(&self.contact_beats, true);
        RhythmAnnotation::new(pulse(&self.accent_beats), pulse(&self.contact_beats), accent, energy, &self.grid)
    }

    pub fn meta(&self) -> ClipMeta {
        let b = self.grid.bar_len;
        let mut pattern = vec![0.0; b];
        for (&at, &s) in self.accent_beats.iter().zip(&self.strengths) {
            pattern[self.grid.bar_position(at.floor() as usize)] += s;
        }
        let bars = self.grid.num_bars().max(1) as f64;
        pattern.iter_mut().for_each(|p| *p /= bars);
        ClipMeta {
            bpm: self.grid.bpm,
            phase_offset: self.grid.phase_offset,
            accent_pattern: pattern,
            accent_beats: self.accent_beats.clone(),
            contact_beats: self.contact_beats.clone(),
        }
    }

    pub fn render(&self, spec: &SyntheticPairSpec, rng: &mut ChaCha8Rng) -> SyntheticRecording {
        let period = self.grid.beat_period();
        let duration = self.grid.duration();

        let sr = spec.sample_rate;
        let n_samples = (duration * sr).ceil() as usize;
        let mut samples: Vec<f64> = (0..n_samples)
            .map(|_| {
                let n: f64 = StandardNormal.sample(rng);
                1e-3 * n
            })
            .collect();
        let decay = 0.08;
        for (&at, &s) in self.accent_beats.iter().zip(&self.strengths) {
            let onset = at * period;
            let start = (onset * sr).ceil() as usize;
            let end = (((onset + 6.0 * decay) * sr).ceil() as usize).min(n_samples);
            for (i, x) in samples.iter_mut().enumerate().take(end).skip(start) {
                let dt = i as f64 / sr - onset;
                let noise: f64 = StandardNormal.sample(rng);
                let tone = (2.0 * PI * TONE_HZ * dt).sin();
                *x += s * (-dt / decay).exp() * (0.5 * tone + 0.25 * noise);
            }
        }

        let fps = spec.motion_fps;
        let n_frames = (duration * fps).floor() as usize;
        let pose_times: Vec<f64> = (0..n_frames).map(|f| f as f64 / fps).collect();
        let lift_window = 0.6 * period;
        let dip_width = 0.15 * period;
        let bar_period = self.grid.bar_len as f64 * period;
        let downbeat = self.grid.phase_offset as f64 * period;
        let poses = pose_times
            .iter()
            .map(|&tau| {
                let mut foot_y = 0.0;
                let mut dip = 0.0;
                for (&at, &s) in self.contact_beats.iter().zip(&self.strengths) {
                    let contact = at * period;
                    let u = (tau - contact) / lift_window;
                    if (-1.0..=0.0).contains(&u) {
                        foot_y += 0.25 * s * (PI * (u + 1.0)).sin().powi(2);
                    }
                    dip += s * (-((tau - contact) / dip_width).powi(2)).exp();
                }
                let theta = 2.0 * PI * (tau - downbeat) / bar_period;
                vec![
                    [0.1 + 0.4 * foot_y, foot_y, 0.0],
                    [SWAY * (PI * tau / period).sin(), 1.0 - 0.08 * dip, 0.0],
                    [0.3 + HAND_RADIUS * theta.cos(), 1.3 + HAND_RADIUS * theta.sin(), 0.1],
                ]
            })
            .collect();

        SyntheticRecording {
            samples,
            sample_rate: sr,
            poses,
            pose_times,
        }
    }
}

fn add_noise(tokens: &mut Matrix, std: f64, rng: &mut ChaCha8Rng) {
    if std > 0.0 {
        for v in tokens.as_mut_slice() {
            let n: f64 = StandardNormal.sample(rng);
            *v += std * n;
        }
    }
}

/// Generates one audio/motion pair, deterministic in `spec.seed`.
pub fn generate_synthetic_pair(spec: &SyntheticPairSpec) -> Result<ClipPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let plan = sample_event_plan(spec, &mut rng)?;
    let rec = plan.render(spec, &mut rng);
    let grid = plan.grid.clone();

    let stft = StftConfig::default();
    let mel = log_mel_spectrogram_with(&rec.samples, rec.sample_rate, spec.n_mels, stft)?;
    let times = frame_times(num_frames(rec.samples.len(), stft), rec.sample_rate, stft);
    let mut audio_tokens = pool_per_beat(&mel, &times, &grid)?;

    let kin = motion_kinematics_per_beat(&rec.poses, &rec.pose_times, &grid, &ContactHeuristic::default())?;
    let mut motion_tokens = kin.tokens;

    add_noise(&mut audio_tokens, spec.feature_noise_std, &mut rng);
    add_noise(&mut motion_tokens, spec.feature_noise_std, &mut rng);
    center_columns(&mut audio_tokens);
    center_columns(&mut motion_tokens);

    let annotation = plan.annotation()?;
    Ok(ClipPair {
        audio: TokenSequence::new(Modality::Audio, audio_tokens, grid.clone(), annotation.clone())?,
        motion: TokenSequence::new(Modality::Motion, motion_tokens, grid, annotation)?,
        meta: plan.meta(),
    })
}

/// Generates `count` pairs with seeds `spec.seed + i`, in parallel.
pub fn generate_dataset(spec: &SyntheticPairSpec, count: usize) -> Result<Vec<ClipPair>> {
    use rayon::prelude::*;
    spec.validate()?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_synthetic_pair(&spec.for_pair(i)))
        .collect()
}
