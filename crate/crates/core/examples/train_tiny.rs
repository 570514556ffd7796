//! Trains the tiny configuration on 200 synthetic pairs and reports test retrieval.
//!
//! cargo run --release --example train_tiny

use std::time::Instant;

use motionbeat::train::{embed_pairs, eval_retrieval, load_pairs, train, Direction, RunConfig};

fn main() -> motionbeat::Result<()> {
    let cfg = RunConfig::tiny();
    let start = Instant::now();
    let pairs = load_pairs(&cfg)?;
    println!("generated {} pairs in {:.1}s", pairs.len(), start.elapsed().as_secs_f64());

    let outcome = train(&cfg, &pairs, None)?;
    for r in &outcome.log {
        println!(
            "epoch {:>2}  loss {:.4}  ecl {:.4}  sral {:.4}  val R@1 {:.1}",
            r.epoch, r.train_loss, r.ecl, r.sral, r.val_r_at_1
        );
    }
    let test: Vec<_> = outcome.split.test.iter().map(|&i| &pairs[i]).collect();
    let (za, zm) = embed_pairs(&outcome.best, &test)?;
    for dir in [Direction::MusicToMotion, Direction::MotionToMusic] {
        let r = eval_retrieval(&za, &zm, dir)?;
        println!(
            "{dir}: R@1 {:.1}  R@5 {:.1}  R@10 {:.1}  MedR {}",
            r.r_at(1),
            r.r_at(5),
            r.r_at(10),
            r.median_rank
        );
    }
    println!("best epoch {}  total {:.1}s", outcome.best_epoch, start.elapsed().as_secs_f64());
    Ok(())
}
