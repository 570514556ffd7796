//! Bar-phase rotations: norms are kept, logits depend only on relative bar
//! position, and shifting a clip by a whole bar leaves its embedding in place.
//!
//! cargo run --release --example phase_equivariance

use motionbeat::model::{bar_phase, phase_rotate, DualEncoder, EncoderConfig};
use motionbeat::rhythm::{beat_shift, generate_synthetic_pair, SyntheticPairSpec};
use motionbeat::tensor::dot;

fn main() -> motionbeat::Result<()> {
    let bar = 4;
    let q = [0.3, -1.2, 0.7, 0.4];
    let k = [1.1, 0.2, -0.5, 0.9];
    let norm = |v: &[f64]| dot(v, v).sqrt();
    let rq = phase_rotate(&q, bar_phase(3, bar))?;
    println!("|q| {:.12}  |R q| {:.12}", norm(&q), norm(&rq));

    println!("logit <R(t) q, R(u) k> by beat pair:");
    for (t, u) in [(0, 1), (1, 2), (5, 6), (2, 0), (7, 5)] {
        let logit = dot(&phase_rotate(&q, bar_phase(t, bar))?, &phase_rotate(&k, bar_phase(u, bar))?);
        println!("  t={t} u={u}  (t-u) mod {bar} = {}  logit {logit:.12}", (t + bar - u % bar) % bar);
    }

    let spec = SyntheticPairSpec::default();
    let pair = generate_synthetic_pair(&spec)?;
    let model = DualEncoder::init(
        EncoderConfig::tiny(pair.audio.dim(), spec.bar_len, false),
        EncoderConfig::tiny(pair.motion.dim(), spec.bar_len, true),
        0,
    )?;
    let z = model.encode_motion(&pair.motion)?.z;
    for shift in [1, 2, spec.bar_len as i64, 2 * spec.bar_len as i64] {
        let zs = model.encode_motion(&beat_shift(&pair.motion, shift)?)?.z;
        let diff = z.iter().zip(&zs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("shift by {shift} beats: cosine {:.6}  max |dz| {diff:.2e}", dot(&z, &zs));
    }
    Ok(())
}
