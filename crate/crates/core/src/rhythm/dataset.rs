//! Line-delimited JSON dataset files, one clip pair per line.
//!
//! Record layout:
//!
//! ```text
//! {"index": 0,
//!  "grid": {"bpm", "bar_len", "num_beats", "beat_boundaries", "phase_offset"},
//!  "meta": {"bpm", "phase_offset", "accent_pattern", "accent_beats", "contact_beats"},
//!  "annotation": {"onset_envelope", "contact_pulse", "accent", "energy",
//!                 "bar_accent_mass", "bar_energy_mass"},
//!  "audio_tokens": [[f64; F]; K],
//!  "motion_tokens": [[f64; M]; K]}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rhythm::annotation::{Modality, RhythmAnnotation, TokenSequence};
use crate::rhythm::grid::BeatGrid;
use crate::rhythm::synth::{ClipMeta, ClipPair};
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub index: usize,
    pub grid: BeatGrid,
    pub meta: ClipMeta,
    pub annotation: RhythmAnnotation,
    pub audio_tokens: Vec<Vec<f64>>,
    pub motion_tokens: Vec<Vec<f64>>,
}

impl PairRecord {
    pub fn from_pair(index: usize, pair: &ClipPair) -> Self {
        Self {
            index,
            grid: pair.audio.grid.clone(),
            meta: pair.meta.clone(),
            annotation: pair.audio.annotation.clone(),
            audio_tokens: pair.audio.tokens.to_rows(),
            motion_tokens: pair.motion.tokens.to_rows(),
        }
    }

    pub fn into_pair(self) -> Result<ClipPair> {
        self.grid.validate()?;
        // recompute the bar distributions so the record cannot contradict itself
        let ann = RhythmAnnotation::new(
            self.annotation.onset_envelope,
            self.annotation.contact_pulse,
            self.annotation.accent,
            self.annotation.energy,
            &self.grid,
        )?;
        let audio = Matrix::from_rows(&self.audio_tokens)?;
        let motion = Matrix::from_rows(&self.motion_tokens)?;
        Ok(ClipPair {
            audio: TokenSequence::new(Modality::Audio, audio, self.grid.clone(), ann.clone())?,
            motion: TokenSequence::new(Modality::Motion, motion, self.grid, ann)?,
            meta: self.meta,
        })
    }
}

pub fn write_dataset(path: &Path, pairs: &[ClipPair]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (i, pair) in pairs.iter().enumerate() {
        serde_json::to_writer(&mut out, &PairRecord::from_pair(i, pair))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<ClipPair>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PairRecord = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: n + 1,
            reason: e.to_string(),
        })?;
        pairs.push(record.into_pair().map_err(|e| Error::Dataset {
            line: n + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(pairs)
}
