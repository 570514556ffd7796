use std::f64::consts::PI;

use motionbeat::rhythm::kinematics::Pose;
use motionbeat::rhythm::{
    bar_mass, beat_shift, build_beat_grid, generate_synthetic_pair, log_mel_spectrogram, motion_kinematics_per_beat,
    onset_envelope_per_beat, pool_per_beat, ContactHeuristic, SyntheticPairSpec,
};
use motionbeat::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn grid_boundaries() {
    let g = build_beat_grid(120.0, 4, 8, 0).unwrap();
    let want: Vec<f64> = (0..=8).map(|i| 0.5 * i as f64).collect();
    assert_eq!(g.beat_boundaries, want);

    let g = build_beat_grid(100.0, 4, 16, 2).unwrap();
    assert_eq!(g.beat_boundaries.len(), 17);
    for w in g.beat_boundaries.windows(2) {
        assert!((w[1] - w[0] - 0.6).abs() < 1e-12);
    }
    assert_eq!(g.bar_position(2), 0);
    assert_eq!(g.phase(2), 0.0);

    assert!(build_beat_grid(0.0, 4, 8, 0).is_err());
    assert!(build_beat_grid(120.0, 4, 8, 4).is_err());
}

#[test]
fn bar_mass_examples() {
    let g = build_beat_grid(120.0, 4, 12, 0).unwrap();
    let values = [2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0];
    let m = bar_mass(&values, &g).unwrap();
    assert_eq!(m[0], vec![1.0, 0.0, 0.0, 0.0]);
    assert_eq!(m[1], vec![0.25; 4]);
    for (got, want) in m[2].iter().zip([0.1, 0.2, 0.3, 0.4]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!(bar_mass(&[1.0, -1.0, 0.0, 0.0], &build_beat_grid(120.0, 4, 4, 0).unwrap()).is_err());
}

#[test]
fn sine_lands_in_the_band_around_its_frequency() {
    let sr = 22050.0;
    let samples: Vec<f64> = (0..8192).map(|i| (2.0 * PI * 440.0 * i as f64 / sr).sin()).collect();
    let spec = log_mel_spectrogram(&samples, sr, 128).unwrap();
    let argmax = |r: usize| {
        let row = spec.row(r);
        (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap()
    };
    let m = argmax(0);
    assert!((1..spec.rows()).all(|r| argmax(r) == m));

    // Triangular filter m spans mel points m..m+2 of an even split of [0, mel(sr/2)].
    let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let hz = |mel: f64| 700.0 * (10f64.powf(mel / 2595.0) - 1.0);
    let step = mel(sr / 2.0) / 129.0;
    assert!(hz(step * m as f64) <= 440.0 && 440.0 <= hz(step * (m + 2) as f64));
}

#[test]
fn silence_and_noise_spectra() {
    let spec = log_mel_spectrogram(&vec![0.0; 4096], 22050.0, 16).unwrap();
    let floor = 1e-6f64.ln();
    assert!(spec.as_slice().iter().all(|&v| (v - floor).abs() < 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noise: Vec<f64> = (0..6000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let spec = log_mel_spectrogram(&noise, 22050.0, 128).unwrap();
    assert_eq!(spec.cols(), 128);
    assert!(spec.is_finite());
}

#[test]
fn pooling_matches_interval_means() {
    let g = build_beat_grid(120.0, 1, 2, 0).unwrap();
    let frames = Matrix::from_rows(&[vec![1.0], vec![3.0], vec![5.0]]).unwrap();
    let pooled = pool_per_beat(&frames, &[0.1, 0.2, 0.7], &g).unwrap();
    assert_eq!(pooled.row(0), &[2.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let times: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64).collect();
    let rows: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random(), rng.random()]).collect();
    let pooled = pool_per_beat(&Matrix::from_rows(&rows).unwrap(), &times, &g).unwrap();
    for beat in 0..2 {
        let members: Vec<&Vec<f64>> = rows
            .iter()
            .zip(&times)
            .filter(|(_, &t)| (t >= 0.5) == (beat == 1))
            .map(|(r, _)| r)
            .collect();
        for c in 0..2 {
            let mean = members.iter().map(|r| r[c]).sum::<f64>() / members.len() as f64;
            assert!((pooled.get(beat, c) - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn onset_envelope_peaks_at_impulse() {
    let g = build_beat_grid(120.0, 4, 8, 0).unwrap();
    let times: Vec<f64> = (0..80).map(|i| 0.025 + 0.05 * i as f64).collect();
    let flat = Matrix::filled(80, 4, 0.3);
    assert!(onset_envelope_per_beat(&flat, &times, &g).unwrap().iter().all(|&v| v == 0.0));

    let mut frames = flat.clone();
    // beat 3 covers [1.5, 2.0) s, i.e. frames 30..40
    frames.row_mut(33).iter_mut().for_each(|v| *v = 5.0);
    let env = onset_envelope_per_beat(&frames, &times, &g).unwrap();
    let peak = (0..env.len()).max_by(|&a, &b| env[a].total_cmp(&env[b])).unwrap();
    assert_eq!(peak, 3);
}

fn frames(n: usize, fps: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 / fps).collect()
}

#[test]
fn kinematics_of_simple_trajectories() {
    let g = build_beat_grid(120.0, 4, 4, 0).unwrap();
    let times = frames(120, 60.0);
    let heuristic = ContactHeuristic::default();

    let still: Vec<Pose> = times.iter().map(|_| vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).collect();
    let k = motion_kinematics_per_beat(&still, &times, &g, &heuristic).unwrap();
    assert!(k.energy.iter().all(|&e| e == 0.0));
    assert!(k.contacts.iter().all(|&c| c == 1.0));

    let s = 0.7;
    let sliding: Vec<Pose> = times.iter().map(|&t| vec![[s * t, 1.0, 0.0], [0.0, 1.0 + s * t, 0.0]]).collect();
    let k = motion_kinematics_per_beat(&sliding, &times, &g, &heuristic).unwrap();
    assert!(k.energy.iter().all(|&e| (e - s * s).abs() < 1e-9));
}

#[test]
fn bouncing_foot_touches_down_once_per_bar() {
    // touchdowns at 0.25 s + whole bars, mid-way through beats 0, 2, 4, 6
    let bar = 2;
    let g = build_beat_grid(120.0, bar, 8, 0).unwrap();
    let times = frames(240, 60.0);
    let bar_seconds = bar as f64 * g.beat_period();
    let poses: Vec<Pose> = times
        .iter()
        .map(|&t| {
            let y = 0.3 * (PI * (t - 0.25) / bar_seconds).sin().powi(2);
            vec![[0.0, y, 0.0]]
        })
        .collect();
    let k = motion_kinematics_per_beat(&poses, &times, &g, &ContactHeuristic::default()).unwrap();
    let peaks: Vec<usize> = (0..k.contacts.len())
        .filter(|&t| k.contacts[t] > k.contacts[(t + 1) % 8] && k.contacts[t] > k.contacts[(t + 7) % 8])
        .collect();
    assert!(peaks.len() >= 2);
    for w in peaks.windows(2) {
        assert_eq!(w[1] - w[0], bar);
    }
}

#[test]
fn synthetic_pairs_are_deterministic() {
    let spec = SyntheticPairSpec {
        seed: 42,
        ..Default::default()
    };
    let a = generate_synthetic_pair(&spec).unwrap();
    let b = generate_synthetic_pair(&spec).unwrap();
    assert_eq!(a.audio.tokens.as_slice(), b.audio.tokens.as_slice());
    assert_eq!(a.motion.tokens.as_slice(), b.motion.tokens.as_slice());
    assert_eq!(a.meta, b.meta);
}

#[test]
fn noiseless_contacts_peak_with_accents() {
    let spec = SyntheticPairSpec {
        contact_lag_std: 0.0,
        feature_noise_std: 0.0,
        seed: 9,
        ..Default::default()
    };
    let p = generate_synthetic_pair(&spec).unwrap();
    assert_eq!(p.meta.accent_beats, p.meta.contact_beats);
    let onset = &p.audio.annotation.onset_envelope;
    let contact = &p.motion.annotation.contact_pulse;
    let k = onset.len();
    let local_max = |v: &[f64], t: usize| v[t] > 0.5 && v[t] >= v[(t + 1) % k] && v[t] >= v[(t + k - 1) % k];
    for t in 0..k {
        assert_eq!(local_max(onset, t), local_max(contact, t), "beat {t}");
    }
}

#[test]
fn contact_lag_has_half_normal_mean() {
    let mut total = 0.0;
    let mut count = 0;
    for seed in 0..1000 {
        let spec = SyntheticPairSpec {
            contact_lag_std: 0.1,
            seed,
            ..Default::default()
        };
        let p = generate_synthetic_pair(&spec).unwrap();
        for (a, c) in p.meta.accent_beats.iter().zip(&p.meta.contact_beats) {
            total += (c - a).abs();
            count += 1;
        }
    }
    let mean = total / count as f64;
    assert!((0.06..=0.14).contains(&mean), "mean offset {mean}");
}

#[test]
fn beat_shift_contract() {
    let p = generate_synthetic_pair(&SyntheticPairSpec::default()).unwrap();
    let m = &p.motion;
    assert_eq!(&beat_shift(m, 0).unwrap(), m);
    assert_eq!(&beat_shift(&beat_shift(m, 1).unwrap(), -1).unwrap(), m);
    assert!(beat_shift(m, m.num_beats() as i64).is_err());
    let s = beat_shift(m, 3).unwrap();
    assert_eq!(s.tokens.row(3), m.tokens.row(0));
    assert_eq!(s.annotation.contact_pulse[3], m.annotation.contact_pulse[0]);
}

proptest! {
    #[test]
    fn bar_mass_rows_are_distributions(values in prop::collection::vec(0.0f64..5.0, 8), offset in 0usize..4) {
        let g = build_beat_grid(90.0, 4, 8, offset).unwrap();
        for bar in bar_mass(&values, &g).unwrap() {
            prop_assert_eq!(bar.len(), 4);
            prop_assert!((bar.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(bar.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn shifts_compose(a in -7i64..8, b in -7i64..8) {
        prop_assume!((a + b).abs() < 8);
        let p = generate_synthetic_pair(&SyntheticPairSpec { num_beats: 8, seed: 3, ..Default::default() }).unwrap();
        let twice = beat_shift(&beat_shift(&p.audio, a).unwrap(), b).unwrap();
        let once = beat_shift(&p.audio, a + b).unwrap();
        prop_assert_eq!(twice.tokens.as_slice(), once.tokens.as_slice());
    }
}
