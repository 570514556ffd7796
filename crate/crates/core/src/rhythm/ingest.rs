//! Builds clip pairs from recorded audio and joint trajectories.
//!
//! Motion files are JSON: `{"frame_times": [f64; T], "joints": [[[x, y, z]; J]; T]}`
//! with `y` up and heights in the same normalized units as the contact thresholds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rhythm::annotation::{Modality, RhythmAnnotation, TokenSequence};
use crate::rhythm::grid::build_beat_grid;
use crate::rhythm::kinematics::{motion_kinematics_per_beat, ContactHeuristic, Pose};
use crate::rhythm::pooling::{center_columns, onset_envelope_per_beat, pool_per_beat};
use crate::rhythm::spectrogram::{frame_times, log_mel_spectrogram_with, num_frames, StftConfig};
use crate::rhythm::synth::{ClipMeta, ClipPair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionRecording {
    pub frame_times: Vec<f64>,
    pub joints: Vec<Pose>,
}

impl MotionRecording {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?)
    }
}

/// Tempo and bar layout supplied by the caller; nothing here estimates tempo.
#[derive(Clone, Debug, PartialEq)]
pub struct IngestSettings {
    pub bpm: f64,
    pub bar_len: usize,
    pub num_beats: usize,
    pub phase_offset: usize,
    pub n_mels: usize,
    pub heuristic: ContactHeuristic,
}

pub fn ingest_recording(
    samples: &[f64],
    sample_rate: f64,
    motion: &MotionRecording,
    settings: &IngestSettings,
) -> Result<ClipPair> {
    let grid = build_beat_grid(settings.bpm, settings.bar_len, settings.num_beats, settings.phase_offset)?;
    let stft = StftConfig::default();
    let mel = log_mel_spectrogram_with(samples, sample_rate, settings.n_mels, stft)?;
    let times = frame_times(num_frames(samples.len(), stft), sample_rate, stft);
    let mut audio_tokens = pool_per_beat(&mel, &times, &grid)?;
    center_columns(&mut audio_tokens);
    let onset = onset_envelope_per_beat(&mel, &times, &grid)?;

    let mut kin = motion_kinematics_per_beat(&motion.joints, &motion.frame_times, &grid, &settings.heuristic)?;
    center_columns(&mut kin.tokens);
    let annotation = RhythmAnnotation::new(onset.clone(), kin.contacts, onset, kin.energy, &grid)?;

    let mut accent_pattern = vec![0.0; settings.bar_len];
    for bar in &annotation.bar_accent_mass {
        for (p, m) in accent_pattern.iter_mut().zip(bar) {
            *p += m / annotation.bar_accent_mass.len() as f64;
        }
    }
    let meta = ClipMeta {
        bpm: settings.bpm,
        phase_offset: settings.phase_offset,
        accent_pattern,
        accent_beats: Vec::new(),
        contact_beats: Vec::new(),
    };
    Ok(ClipPair {
        audio: TokenSequence::new(Modality::Audio, audio_tokens, grid.clone(), annotation.clone())?,
        motion: TokenSequence::new(Modality::Motion, kin.tokens, grid, annotation)?,
        meta,
    })
}
