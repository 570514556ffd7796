//! Optimization, evaluation and run configuration.

pub mod bas;
pub mod config;
pub mod optimizer;
pub mod retrieval;
pub mod split;
pub mod trainer;

pub use bas::{beat_alignment_score, rhythm_event_times};
pub use config::RunConfig;
pub use optimizer::{optimizer_step, AdamWSettings, AdamWState};
pub use retrieval::{eval_retrieval, Direction, RetrievalReport};
pub use split::{split_indices, Split};
pub use trainer::{embed_pairs, load_pairs, train, train_on_split, EpochRecord, TrainOutcome};
