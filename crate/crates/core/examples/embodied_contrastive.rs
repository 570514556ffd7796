//! Builds the rhythm-aware negatives for one batch and shows how each kind
//! changes the contrastive loss, then scores rhythm alignment of true and
//! mismatched pairs.
//!
//! cargo run --release --example embodied_contrastive

use motionbeat::model::{DualEncoder, EncoderConfig};
use motionbeat::objectives::{
    ecl_loss, in_batch_negatives, make_beat_jitter_negatives, mine_tempo_negatives, sral_loss, total_loss, LossWeights,
};
use motionbeat::rhythm::{generate_dataset, ClipMeta, SyntheticPairSpec};
use motionbeat::Matrix;

fn main() -> motionbeat::Result<()> {
    let spec = SyntheticPairSpec::default();
    let pool = generate_dataset(&spec, 64)?;
    let model = DualEncoder::init(
        EncoderConfig::tiny(pool[0].audio.dim(), spec.bar_len, false),
        EncoderConfig::tiny(pool[0].motion.dim(), spec.bar_len, true),
        0,
    )?;
    let w = LossWeights::default();
    let batch: Vec<usize> = (0..8).collect();

    let mut za = Vec::new();
    let mut zm = Vec::new();
    for &i in &batch {
        za.push(model.encode_audio(&pool[i].audio)?.z);
        zm.push(model.encode_motion(&pool[i].motion)?.z);
    }
    let (za, zm) = (Matrix::from_rows(&za)?, Matrix::from_rows(&zm)?);
    let mut sets = in_batch_negatives(batch.len());
    let empty = Matrix::zeros(0, zm.cols());
    println!("in-batch negatives only:  ECL {:.4}", ecl_loss(&za, &zm, &sets, &empty, w.tau, false)?.value);

    let metas: Vec<ClipMeta> = pool.iter().map(|p| p.meta.clone()).collect();
    let mut bank_ids = Vec::new();
    for (s, &i) in sets.iter_mut().zip(&batch) {
        let mined = mine_tempo_negatives(&metas[i], &metas, &batch, 4, 0.05, i as u64);
        for c in mined.indices {
            let row = bank_ids.iter().position(|&b| b == c).unwrap_or_else(|| {
                bank_ids.push(c);
                bank_ids.len() - 1
            });
            s.tempo_negs.push(row);
        }
    }
    let bank_rows = bank_ids.iter().map(|&c| Ok(model.encode_motion(&pool[c].motion)?.z)).collect::<motionbeat::Result<Vec<_>>>()?;
    let bank = if bank_rows.is_empty() { empty.clone() } else { Matrix::from_rows(&bank_rows)? };
    println!(
        "+ tempo negatives ({} mined clips, bpm within 5%):  ECL {:.4}",
        bank_ids.len(),
        ecl_loss(&za, &zm, &sets, &bank, w.tau, false)?.value
    );

    for (s, &i) in sets.iter_mut().zip(&batch) {
        s.jitter_negs = make_beat_jitter_negatives(&pool[i].motion, &model)?.to_vec();
    }
    let ecl = ecl_loss(&za, &zm, &sets, &bank, w.tau, false)?.value;
    println!("+ beat-jitter negatives:  ECL {ecl:.4}");

    let a = &pool[0].audio.annotation;
    let true_pair = sral_loss(&a.onset_envelope, &pool[0].motion.annotation.contact_pulse, &a.bar_accent_mass, &pool[0].motion.annotation.bar_energy_mass, &w)?;
    let other = &pool[1].motion.annotation;
    let k = a.onset_envelope.len().min(other.contact_pulse.len());
    let bars = a.bar_accent_mass.len().min(other.bar_energy_mass.len());
    let wrong = sral_loss(&a.onset_envelope[..k], &other.contact_pulse[..k], &a.bar_accent_mass[..bars], &other.bar_energy_mass[..bars], &w)?;
    println!("SRAL true pair {:.4} (bar EMD {:.4})  mismatched {:.4} (bar EMD {:.4})", true_pair.value, true_pair.bar_term, wrong.value, wrong.bar_term);
    println!("total loss with alpha {}: {:.4}", w.alpha, total_loss(ecl, true_pair.value, w.alpha)?);
    Ok(())
}
