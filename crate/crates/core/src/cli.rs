//! Command-line front end. `run_cli` returns the process exit code:
//! 0 on success, 1 on usage or validation errors, 2 on runtime failures.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::align::{cdf_gap, grad_check_emd, grad_check_soft_dtw};
use crate::error::{Error, Result};
use crate::model::{contact_scalars, load_checkpoint, DualEncoder, EncoderConfig};
use crate::objectives::{grad_check_model, prepare_negatives, sral_loss, ObjectiveConfig};
use crate::rhythm::dataset::{read_dataset, write_dataset};
use crate::rhythm::synth::{generate_dataset, SyntheticPairSpec};
use crate::train::bas::{beat_alignment_score, rhythm_event_times, DEFAULT_SIGMA};
use crate::train::config::RunConfig;
use crate::train::retrieval::{eval_retrieval, Direction};
use crate::train::split::split_indices;
use crate::train::trainer::{embed_pairs, load_pairs, train};

pub const KERNEL_TOLERANCE: f64 = 1e-4;
pub const MODEL_TOLERANCE: f64 = 1e-3;

#[derive(Parser, Debug)]
#[command(name = "motionbeat", version, about = "Rhythm-aware music and motion embeddings")]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic clip pairs into a JSONL dataset.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// TOML file with a synthetic pair spec; defaults apply otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lag_std: Option<f64>,
    },
    /// Train both encoders.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSONL dataset; overrides the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Retrieval metrics of a checkpoint on a dataset.
    EvalRetrieval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Evaluate only the test part of the split made with this seed.
        #[arg(long)]
        split_seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = DirectionArg::MusicToMotion)]
        direction: DirectionArg,
    },
    /// Beat alignment and rhythm alignment statistics of a dataset.
    EvalAlign {
        #[arg(long)]
        data: PathBuf,
        /// Also report alignment of a checkpoint's rhythm-head predictions.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
    },
    /// Compare analytic gradients with finite differences.
    GradCheck {
        #[arg(long, value_enum)]
        kernel: Kernel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the configuration and parameter summary of a checkpoint.
    InspectCkpt {
        #[arg(long)]
        ckpt: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    MusicToMotion,
    MotionToMusic,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::MusicToMotion => Direction::MusicToMotion,
            DirectionArg::MotionToMusic => Direction::MotionToMusic,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kernel {
    Softdtw,
    Emd,
    Model,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn emit(json: bool, value: serde_json::Value, text: impl FnOnce() -> String) {
    if json {
        println!("{value}");
    } else {
        println!("{}", text());
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let json = cli.json;
    match &cli.command {
        Command::GenData {
            out,
            count,
            spec,
            seed,
            lag_std,
        } => {
            let mut s = match spec {
                Some(path) => read_toml::<SyntheticPairSpec>(path)?,
                None => SyntheticPairSpec::default(),
            };
            if let Some(seed) = seed {
                s.seed = *seed;
            }
            if let Some(lag) = lag_std {
                s.contact_lag_std = *lag;
            }
            let pairs = generate_dataset(&s, *count)?;
            write_dataset(out, &pairs)?;
            emit(json, json!({"pairs": pairs.len(), "out": out}), || {
                format!("wrote {} pairs to {}", pairs.len(), out.display())
            });
        }
        Command::Train {
            config,
            data,
            out,
            seed,
            epochs,
        } => {
            let mut cfg = match config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::tiny(),
            };
            cfg.apply_env()?;
            if let Some(seed) = seed {
                cfg.seed = *seed;
            }
            if let Some(e) = epochs {
                cfg.max_epochs = *e;
            }
            if let Some(d) = data {
                if !d.exists() {
                    return Err(Error::MissingFile(d.clone()));
                }
                cfg.dataset = Some(d.clone());
            }
            cfg.validate()?;
            let pairs = load_pairs(&cfg)?;
            let outcome = train(&cfg, &pairs, Some(out))?;
            for r in &outcome.log {
                if json {
                    println!("{}", serde_json::to_string(r)?);
                } else {
                    println!(
                        "epoch {:>3}  loss {:.4}  ecl {:.4}  sral {:.4}  val_r@1 {:.1}  tempo shortfall {}",
                        r.epoch, r.train_loss, r.ecl, r.sral, r.val_r_at_1, r.tempo_shortfall
                    );
                }
            }
            let path = outcome.checkpoint_path.clone().unwrap_or_default();
            emit(
                json,
                json!({"best_epoch": outcome.best_epoch, "best_val_r_at_1": outcome.best_val_r_at_1, "checkpoint": path}),
                || {
                    format!(
                        "best epoch {} (val R@1 {:.1}), checkpoint {}",
                        outcome.best_epoch,
                        outcome.best_val_r_at_1,
                        path.display()
                    )
                },
            );
        }
        Command::EvalRetrieval {
            ckpt,
            data,
            split_seed,
            direction,
        } => {
            let model = load_checkpoint(ckpt)?;
            let pairs = read_existing_dataset(data)?;
            let ids: Vec<usize> = match split_seed {
                Some(seed) => split_indices(pairs.len(), *seed).test,
                None => (0..pairs.len()).collect(),
            };
            let subset: Vec<_> = ids.iter().map(|&i| &pairs[i]).collect();
            let (za, zm) = embed_pairs(&model, &subset)?;
            let r = eval_retrieval(&za, &zm, (*direction).into())?;
            emit(json, serde_json::to_value(&r)?, || {
                format!(
                    "{}  R@1 {:.1}  R@5 {:.1}  R@10 {:.1}  MedR {}",
                    r.direction,
                    r.r_at(1),
                    r.r_at(5),
                    r.r_at(10),
                    r.median_rank
                )
            });
        }
        Command::EvalAlign { data, ckpt, sigma } => {
            let pairs = read_existing_dataset(data)?;
            let model = ckpt.as_deref().map(load_checkpoint).transpose()?;
            eval_align(&pairs, model.as_ref(), *sigma, json)?;
        }
        Command::GradCheck { kernel, seed } => {
            let (err, tol) = match kernel {
                Kernel::Softdtw => (kernel_check_soft_dtw(*seed)?, KERNEL_TOLERANCE),
                Kernel::Emd => (kernel_check_emd(*seed)?, KERNEL_TOLERANCE),
                Kernel::Model => (model_check(*seed)?, MODEL_TOLERANCE),
            };
            let pass = err < tol;
            emit(
                json,
                json!({"kernel": format!("{kernel:?}").to_lowercase(), "max_rel_error": err, "tolerance": tol, "pass": pass}),
                || format!("max relative error {err:.3e} (tolerance {tol:.0e})"),
            );
            return Ok(if pass { 0 } else { 2 });
        }
        Command::InspectCkpt { ckpt } => {
            let model = load_checkpoint(ckpt)?;
            let (al, av) = contact_scalars(&model.motion);
            let summary = json!({
                "audio": model.audio_cfg,
                "motion": model.motion_cfg,
                "audio_params": model.audio.num_scalars(),
                "motion_params": model.motion.num_scalars(),
                "alpha_logit": al,
                "alpha_val": av,
            });
            emit(json, summary, || {
                format!(
                    "audio encoder: {}\nmotion encoder: {}\nparameters: {} audio, {} motion\ncontact scalars: alpha_logit {al:.4}, alpha_val {av:.4}",
                    describe(&model.audio_cfg),
                    describe(&model.motion_cfg),
                    model.audio.num_scalars(),
                    model.motion.num_scalars()
                )
            });
        }
    }
    Ok(0)
}

fn describe(c: &EncoderConfig) -> String {
    format!(
        "{} layers, hidden {}, {} heads, embed {}, input {}, bar {}{}",
        c.num_layers,
        c.hidden_dim,
        c.num_heads,
        c.embed_dim,
        c.input_dim,
        c.bar_len,
        if c.use_contacts { ", contact-guided" } else { "" }
    )
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    toml::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Config(e.to_string()))
}

fn read_existing_dataset(path: &Path) -> Result<Vec<crate::rhythm::synth::ClipPair>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_dataset(path)
}

fn eval_align(
    pairs: &[crate::rhythm::synth::ClipPair],
    model: Option<&DualEncoder>,
    sigma: f64,
    json: bool,
) -> Result<()> {
    let weights = ObjectiveConfig::default().weights;
    let n = pairs.len().max(1) as f64;
    let (mut bas, mut beat, mut bar, mut pred_beat, mut pred_bar) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        let ann = &p.audio.annotation;
        let grid = &p.audio.grid;
        let music = rhythm_event_times(&ann.onset_envelope, grid, 0.5);
        let motion = rhythm_event_times(&p.motion.annotation.contact_pulse, grid, 0.5);
        if !music.is_empty() && !motion.is_empty() {
            bas += beat_alignment_score(&music, &motion, sigma)? / n;
        }
        let r = sral_loss(
            &ann.onset_envelope,
            &p.motion.annotation.contact_pulse,
            &ann.bar_accent_mass,
            &p.motion.annotation.bar_energy_mass,
            &weights,
        )?;
        beat += r.beat_term / n;
        bar += r.bar_term / n;
        if let Some(m) = model {
            let o = m.encode_audio(&p.audio)?.onset_pred;
            let c = m.encode_motion(&p.motion)?.contact_pred;
            let a_bar = crate::rhythm::annotation::bar_mass(&o, grid)?;
            let r = sral_loss(&o, &c, &a_bar, &p.motion.annotation.bar_energy_mass, &weights)?;
            pred_beat += r.beat_term / n;
            pred_bar += r.bar_term / n;
        }
    }
    let mut value = json!({"pairs": pairs.len(), "bas": bas, "sral_beat": beat, "sral_bar": bar});
    if model.is_some() {
        value["pred_sral_beat"] = json!(pred_beat);
        value["pred_sral_bar"] = json!(pred_bar);
    }
    emit(json, value, || {
        let mut s = format!(
            "pairs {}\nBAS {bas:.4}\nannotated soft-DTW {beat:.4}\nannotated bar EMD {bar:.4}",
            pairs.len()
        );
        if model.is_some() {
            s.push_str(&format!("\npredicted soft-DTW {pred_beat:.4}\npredicted bar EMD {pred_bar:.4}"));
        }
        s
    });
    Ok(())
}

fn kernel_check_soft_dtw(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a: Vec<f64> = (0..rng.random_range(1..=6)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..rng.random_range(1..=6)).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.max(grad_check_soft_dtw(&a, &b, 0.1, 1e-5)?);
    }
    Ok(worst)
}

fn random_simplex(rng: &mut ChaCha8Rng, b: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..b).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn kernel_check_emd(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 20 {
        let p = random_simplex(&mut rng, 4);
        let q = random_simplex(&mut rng, 4);
        if cdf_gap(&p, &q) < 1e-4 {
            continue;
        }
        worst = worst.max(grad_check_emd(&p, &q, 1e-8)?);
        checked += 1;
    }
    Ok(worst)
}

/// Small model, eight-beat clips, 200 sampled parameters.
fn model_check(seed: u64) -> Result<f64> {
    let spec = SyntheticPairSpec {
        num_beats: 8,
        n_mels: 16,
        seed,
        ..Default::default()
    };
    let pairs = generate_dataset(&spec, 3)?;
    let base = EncoderConfig {
        num_layers: 2,
        hidden_dim: 16,
        num_heads: 2,
        embed_dim: 8,
        ..EncoderConfig::tiny(spec.n_mels, spec.bar_len, false)
    };
    let motion = EncoderConfig {
        input_dim: 27,
        use_contacts: true,
        ..base.clone()
    };
    let model = DualEncoder::init(base, motion, seed)?;
    let batch: Vec<_> = pairs.iter().collect();
    let cfg = ObjectiveConfig {
        negatives: crate::objectives::NegativeConfig {
            tempo_count: 0,
            ..Default::default()
        },
        ..Default::default()
    };
    let negs = prepare_negatives(&model, &batch, &[0, 1, 2], None, &cfg.negatives, seed)?;
    Ok(grad_check_model(&model, &batch, &negs, &cfg, 1e-5, 200, seed)?.max_rel_error)
}
