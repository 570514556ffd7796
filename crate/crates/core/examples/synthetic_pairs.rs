//! Generates a handful of synthetic music/dance pairs and prints their rhythm structure.
//!
//! cargo run --release --example synthetic_pairs

use motionbeat::rhythm::{generate_dataset, SyntheticPairSpec};

fn main() -> motionbeat::Result<()> {
    let spec = SyntheticPairSpec::default();
    let pairs = generate_dataset(&spec, 4)?;
    for (i, p) in pairs.iter().enumerate() {
        let grid = &p.audio.grid;
        println!(
            "pair {i}: {:.1} bpm, {} beats ({} bars of {}), downbeat at beat {}",
            p.meta.bpm,
            grid.num_beats,
            grid.num_bars(),
            grid.bar_len,
            p.meta.phase_offset
        );
        println!("  audio tokens {}x{}, motion tokens {}x{}", p.audio.num_beats(), p.audio.dim(), p.motion.num_beats(), p.motion.dim());
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
        println!("  accent pattern   {}", fmt(&p.meta.accent_pattern));
        let ann = &p.audio.annotation;
        println!("  onset envelope   {}", fmt(&ann.onset_envelope[..8]));
        println!("  contact pulse    {}", fmt(&ann.contact_pulse[..8]));
        if let (Some(a), Some(e)) = (ann.bar_accent_mass.first(), ann.bar_energy_mass.first()) {
            println!("  first bar accent mass {}  energy mass {}", fmt(a), fmt(e));
        }
    }
    Ok(())
}
