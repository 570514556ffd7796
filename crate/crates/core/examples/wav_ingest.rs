//! Writes a rendered clip to a WAV file and a motion JSON file, then ingests
//! the pair back from disk with a caller-supplied tempo.
//!
//! cargo run --release --example wav_ingest

use motionbeat::rhythm::ingest::{ingest_recording, IngestSettings, MotionRecording};
use motionbeat::rhythm::synth::sample_event_plan;
use motionbeat::rhythm::wav::{read_wav_mono, write_wav_mono};
use motionbeat::rhythm::{ContactHeuristic, SyntheticPairSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> motionbeat::Result<()> {
    let spec = SyntheticPairSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let plan = sample_event_plan(&spec, &mut rng)?;
    let rec = plan.render(&spec, &mut rng);

    let dir = std::env::temp_dir().join("motionbeat-wav-ingest");
    std::fs::create_dir_all(&dir)?;
    let wav = dir.join("clip.wav");
    let motion_path = dir.join("clip.motion.json");
    write_wav_mono(&wav, &rec.samples, rec.sample_rate as u32)?;
    let motion = MotionRecording {
        frame_times: rec.pose_times.clone(),
        joints: rec.poses.clone(),
    };
    std::fs::write(&motion_path, serde_json::to_string(&motion)?)?;
    println!("wrote {} and {}", wav.display(), motion_path.display());

    let (samples, sr) = read_wav_mono(&wav)?;
    let motion = MotionRecording::load(&motion_path)?;
    let settings = IngestSettings {
        bpm: plan.grid.bpm,
        bar_len: plan.grid.bar_len,
        num_beats: plan.grid.num_beats,
        phase_offset: plan.grid.phase_offset,
        n_mels: spec.n_mels,
        heuristic: ContactHeuristic::default(),
    };
    let pair = ingest_recording(&samples, sr, &motion, &settings)?;
    println!(
        "{} samples at {sr} Hz, {} frames -> {} beats of {}-d audio and {}-d motion tokens",
        samples.len(),
        motion.frame_times.len(),
        pair.audio.num_beats(),
        pair.audio.dim(),
        pair.motion.dim()
    );
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
    println!("onset envelope  {}", fmt(&pair.audio.annotation.onset_envelope[..8]));
    println!("contact pulse   {}", fmt(&pair.motion.annotation.contact_pulse[..8]));
    println!("planned events at beats {}", fmt(&plan.accent_beats.iter().copied().take(6).collect::<Vec<_>>()));
    Ok(())
}
