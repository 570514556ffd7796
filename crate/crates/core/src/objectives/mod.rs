//! Contrastive and rhythm-alignment objectives.

pub mod batch;
pub mod ecl;
pub mod gradcheck;
pub mod negatives;
pub mod sral;

pub use batch::{
    batch_objective, prepare_negatives, BatchLoss, BatchNegatives, ObjectiveConfig, SralSource, TempoPool, Terms,
};
pub use ecl::{ecl_loss, in_batch_negatives, EclResult};
pub use gradcheck::{grad_check_model, GradCheckReport};
pub use negatives::{make_beat_jitter_negatives, mine_tempo_negatives, NegativeConfig, NegativeSet, TempoMining};
pub use sral::{sral_loss, total_loss, LossWeights, SralResult};
