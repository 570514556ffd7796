//! Beat grids, beat-synchronous features and rhythm annotations.

pub mod annotation;
pub mod dataset;
pub mod grid;
pub mod ingest;
pub mod kinematics;
pub mod pooling;
pub mod spectrogram;
pub mod synth;
pub mod wav;

pub use annotation::{bar_mass, bar_mass_backward, beat_shift, Modality, RhythmAnnotation, TokenSequence};
pub use grid::{build_beat_grid, BeatGrid};
pub use kinematics::{motion_kinematics_per_beat, BeatKinematics, ContactHeuristic};
pub use pooling::{center_columns, onset_envelope_per_beat, pool_per_beat};
pub use spectrogram::log_mel_spectrogram;
pub use synth::{generate_dataset, generate_synthetic_pair, ClipMeta, ClipPair, SyntheticPairSpec};
