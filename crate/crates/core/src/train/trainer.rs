//! Training loop with validation-based early stopping.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{save_checkpoint, DualEncoder};
use crate::objectives::{batch_objective, prepare_negatives, ObjectiveConfig, TempoPool, Terms};
use crate::rhythm::annotation::TokenSequence;
use crate::rhythm::dataset::read_dataset;
use crate::rhythm::synth::{generate_dataset, ClipMeta, ClipPair};
use crate::tensor::Matrix;
use crate::train::config::RunConfig;
use crate::train::optimizer::{optimizer_step, AdamWState};
use crate::train::retrieval::{eval_retrieval, true_pair_ranks, similarity_matrix, Direction};
use crate::train::split::{split_indices, Split};

pub const CHECKPOINT_FILE: &str = "best.mbt";
pub const METRICS_FILE: &str = "metrics.jsonl";

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub ecl: f64,
    pub sral: f64,
    pub val_r_at_1: f64,
    /// Tempo negatives requested over the epoch that the pool could not supply.
    pub tempo_shortfall: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best: DualEncoder,
    pub best_epoch: usize,
    pub best_val_r_at_1: f64,
    pub log: Vec<EpochRecord>,
    pub split: Split,
    /// Written files, when an output directory was given.
    pub checkpoint_path: Option<PathBuf>,
}

/// Loads the dataset named by the config, or generates the synthetic one.
pub fn load_pairs(cfg: &RunConfig) -> Result<Vec<ClipPair>> {
    match &cfg.dataset {
        Some(path) => read_dataset(path),
        None => generate_dataset(&cfg.synthetic, cfg.num_pairs),
    }
}

/// Audio and motion embeddings of `pairs`, one row per pair.
pub fn embed_pairs(model: &DualEncoder, pairs: &[&ClipPair]) -> Result<(Matrix, Matrix)> {
    let rows: Vec<(Vec<f64>, Vec<f64>)> = pairs
        .par_iter()
        .map(|p| Ok((model.encode_audio(&p.audio)?.z, model.encode_motion(&p.motion)?.z)))
        .collect::<Result<_>>()?;
    let (a, m): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    if a.is_empty() {
        return Ok((Matrix::zeros(0, model.embed_dim()), Matrix::zeros(0, model.embed_dim())));
    }
    Ok((Matrix::from_rows(&a)?, Matrix::from_rows(&m)?))
}

/// Validation score: R@1 music-to-motion, then mean reciprocal rank to order
/// epochs with equal R@1.
fn validation_score(model: &DualEncoder, pairs: &[&ClipPair]) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (za, zm) = embed_pairs(model, pairs)?;
    let report = eval_retrieval(&za, &zm, Direction::MusicToMotion)?;
    let ranks = true_pair_ranks(&similarity_matrix(&za, &zm)?);
    let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64;
    Ok((report.r_at(1), mrr))
}

/// Trains on the split's training pairs. With `out_dir`, appends one metrics
/// record per epoch and writes the best checkpoint there.
pub fn train(cfg: &RunConfig, pairs: &[ClipPair], out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let split = split_indices(pairs.len(), cfg.seed);
    if split.train.len() < cfg.batch_size {
        return Err(Error::Config(format!(
            "{} training pairs cannot fill a batch of {}",
            split.train.len(),
            cfg.batch_size
        )));
    }
    train_on_split(cfg, pairs, split, out_dir)
}

pub fn train_on_split(cfg: &RunConfig, pairs: &[ClipPair], split: Split, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_pairs: Vec<&ClipPair> = split.train.iter().map(|&i| &pairs[i]).collect();
    let val_pairs: Vec<&ClipPair> = split.val.iter().map(|&i| &pairs[i]).collect();
    let metas: Vec<ClipMeta> = train_pairs.iter().map(|p| p.meta.clone()).collect();
    let motions: Vec<&TokenSequence> = train_pairs.iter().map(|p| &p.motion).collect();

    let mut metrics = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(METRICS_FILE);
            File::create(&path)?;
            Some(OpenOptions::new().append(true).open(path)?)
        }
        None => None,
    };

    let mut model = DualEncoder::init(cfg.audio.clone(), cfg.motion.clone(), cfg.seed)?;
    let mut audio_state = AdamWState::new(&model.audio);
    let mut motion_state = AdamWState::new(&model.motion);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let obj: &ObjectiveConfig = &cfg.objective;

    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_score = validation_score(&model, &val_pairs)?;
    let mut stale = 0;
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..train_pairs.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut ecl_sum, mut sral_sum, mut steps) = (0.0, 0.0, 0.0, 0usize);
        let mut shortfall = 0;
        for (b, ids) in order.chunks(cfg.batch_size).enumerate() {
            if ids.len() < 2 {
                continue;
            }
            let batch: Vec<&ClipPair> = ids.iter().map(|&i| train_pairs[i]).collect();
            let tempo = Some(TempoPool {
                metas: &metas,
                motions: &motions,
            });
            let negs = prepare_negatives(
                &model,
                &batch,
                ids,
                tempo,
                &obj.negatives,
                cfg.seed ^ ((epoch as u64) << 32) ^ ((b as u64) << 16),
            )?;
            shortfall += negs.tempo_shortfall;
            let loss = batch_objective(&model, &batch, &negs, obj, Terms::ALL)?;
            optimizer_step(&mut model.audio, &loss.grad_audio, &mut audio_state, &cfg.optimizer)
                .map_err(|e| prefix_param(e, "audio"))?;
            optimizer_step(&mut model.motion, &loss.grad_motion, &mut motion_state, &cfg.optimizer)
                .map_err(|e| prefix_param(e, "motion"))?;
            loss_sum += loss.total;
            ecl_sum += loss.ecl;
            sral_sum += loss.sral;
            steps += 1;
        }
        let steps = steps.max(1) as f64;
        let score = validation_score(&model, &val_pairs)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / steps,
            ecl: ecl_sum / steps,
            sral: sral_sum / steps,
            val_r_at_1: score.0,
            tempo_shortfall: shortfall,
        };
        if let Some(f) = metrics.as_mut() {
            writeln!(f, "{}", serde_json::to_string(&record)?)?;
        }
        log.push(record);

        if score > best_score {
            best_score = score;
            best = model.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let checkpoint_path = match out_dir {
        Some(dir) => {
            let path = dir.join(CHECKPOINT_FILE);
            save_checkpoint(&path, &best)?;
            Some(path)
        }
        None => None,
    };
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_val_r_at_1: best_score.0,
        log,
        split,
        checkpoint_path,
    })
}

fn prefix_param(e: Error, encoder: &str) -> Error {
    match e {
        Error::NanGradient { param } => Error::NanGradient {
            param: format!("{encoder}.{param}"),
        },
        other => other,
    }
}
