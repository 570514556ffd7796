//! Trains briefly, then reports cross-modal retrieval on held-out pairs, the
//! score of each true pair against its one-beat jitters, and beat alignment.
//!
//! cargo run --release --example retrieval_report

use motionbeat::rhythm::beat_shift;
use motionbeat::tensor::dot;
use motionbeat::train::{beat_alignment_score, embed_pairs, eval_retrieval, load_pairs, rhythm_event_times, train, Direction, RunConfig};

fn main() -> motionbeat::Result<()> {
    let cfg = RunConfig {
        max_epochs: 8,
        ..RunConfig::tiny()
    };
    let pairs = load_pairs(&cfg)?;
    let outcome = train(&cfg, &pairs, None)?;
    let model = &outcome.best;
    let test: Vec<_> = outcome.split.test.iter().map(|&i| &pairs[i]).collect();

    let (za, zm) = embed_pairs(model, &test)?;
    for dir in [Direction::MusicToMotion, Direction::MotionToMusic] {
        let r = eval_retrieval(&za, &zm, dir)?;
        println!("{dir}: R@1 {:.1}  R@5 {:.1}  R@10 {:.1}  MedR {}", r.r_at(1), r.r_at(5), r.r_at(10), r.median_rank);
    }

    let mut wins = 0;
    let mut bas = 0.0;
    for p in &test {
        let a = model.encode_audio(&p.audio)?;
        let s = dot(&a.z, &model.encode_motion(&p.motion)?.z);
        let later = dot(&a.z, &model.encode_motion(&beat_shift(&p.motion, 1)?)?.z);
        let earlier = dot(&a.z, &model.encode_motion(&beat_shift(&p.motion, -1)?)?.z);
        if s > later && s > earlier {
            wins += 1;
        }
        let music = rhythm_event_times(&a.onset_pred, &p.audio.grid, 0.5);
        let motion = rhythm_event_times(&model.encode_motion(&p.motion)?.contact_pred, &p.motion.grid, 0.5);
        if !music.is_empty() && !motion.is_empty() {
            bas += beat_alignment_score(&music, &motion, 0.1)? / test.len() as f64;
        }
    }
    println!("true pair beats both one-beat jitters on {wins}/{} clips", test.len());
    println!("beat alignment score of predicted events {bas:.3}");
    Ok(())
}
