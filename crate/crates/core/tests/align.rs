use motionbeat::align::{
    cdf_gap, emd_1d, grad_check_emd, grad_check_soft_dtw, hard_dtw_oracle, soft_dtw, SoftDtwConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum over all monotone alignment paths, by explicit recursion.
fn dtw_by_paths(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
        let c = (a[i] - b[j]).powi(2);
        if i + 1 == a.len() && j + 1 == b.len() {
            return c;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() {
            best = best.min(walk(a, b, i + 1, j));
        }
        if j + 1 < b.len() {
            best = best.min(walk(a, b, i, j + 1));
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(walk(a, b, i + 1, j + 1));
        }
        c + best
    }
    walk(a, b, 0, 0)
}

/// Transport cost of the monotone (north-west corner) coupling, which is
/// optimal on a line.
fn emd_by_transport(p: &[f64], q: &[f64]) -> f64 {
    let (mut p, mut q) = (p.to_vec(), q.to_vec());
    let (mut i, mut j, mut cost) = (0, 0, 0.0);
    while i < p.len() && j < q.len() {
        let m = p[i].min(q[j]);
        cost += m * (i as f64 - j as f64).abs();
        p[i] -= m;
        q[j] -= m;
        if p[i] <= 1e-15 {
            i += 1;
        } else {
            j += 1;
        }
    }
    cost
}

fn simplex(rng: &mut ChaCha8Rng, b: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..b).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn seq(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

#[test]
fn hard_dtw_small_cases() {
    assert_eq!(hard_dtw_oracle(&[0.0, 2.0], &[0.0, 0.0]), 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let (a, b) = (seq(&mut rng, 5), seq(&mut rng, 5));
        assert!((hard_dtw_oracle(&a, &b) - dtw_by_paths(&a, &b)).abs() < 1e-12);
    }
}

#[test]
fn soft_dtw_two_by_two_matches_path_sum() {
    let gamma = 0.5;
    let r = soft_dtw(&[0.0, 1.0], &[0.0, 1.0], SoftDtwConfig { gamma }).unwrap();
    let expected = -gamma * (1.0 + 2.0 * (-1.0 / gamma).exp()).ln();
    assert!((r.value - expected).abs() < 1e-12);
}

#[test]
fn soft_dtw_gap_shrinks_with_gamma() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let (a, b) = (seq(&mut rng, n), seq(&mut rng, m));
        let hard = dtw_by_paths(&a, &b);
        let gaps: Vec<f64> = [1.0, 0.1, 1e-3]
            .iter()
            .map(|&gamma| hard - soft_dtw(&a, &b, SoftDtwConfig { gamma }).unwrap().value)
            .collect();
        assert!(gaps.iter().all(|&g| g >= -1e-12));
        assert!(gaps[1] <= gaps[0] + 1e-12 && gaps[2] <= gaps[1] + 1e-12);
    }
}

#[test]
fn soft_dtw_rejects_bad_input() {
    assert!(soft_dtw(&[], &[1.0], SoftDtwConfig::default()).is_err());
    assert!(soft_dtw(&[1.0], &[1.0], SoftDtwConfig { gamma: 0.0 }).is_err());
    assert!(soft_dtw(&[f64::NAN], &[1.0], SoftDtwConfig::default()).is_err());
}

#[test]
fn emd_examples() {
    let r = emd_1d(&[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5]).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12);
    let r = emd_1d(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]).unwrap();
    assert!((r.value - 3.0).abs() < 1e-12);
    assert!(emd_1d(&[0.5, 0.5], &[1.0]).is_err());
    assert!(emd_1d(&[-0.5, 1.5], &[0.5, 0.5]).is_err());
}

#[test]
fn emd_triangle_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let b = rng.random_range(2..=8);
        let (p, q, r) = (simplex(&mut rng, b), simplex(&mut rng, b), simplex(&mut rng, b));
        let d = |x: &[f64], y: &[f64]| emd_1d(x, y).unwrap().value;
        assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
    }
}

#[test]
fn gradient_checks_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let (a, b) = (seq(&mut rng, 5), seq(&mut rng, 4));
        assert!(grad_check_soft_dtw(&a, &b, 0.1, 1e-6).unwrap() < 1e-4);
    }
    let mut checked = 0;
    while checked < 20 {
        let (p, q) = (simplex(&mut rng, 4), simplex(&mut rng, 4));
        if cdf_gap(&p, &q) < 1e-3 {
            continue;
        }
        assert!(grad_check_emd(&p, &q, 1e-7).unwrap() < 1e-4);
        checked += 1;
    }
}

#[test]
fn halving_the_step_keeps_soft_dtw_error_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (a, b) = (seq(&mut rng, 4), seq(&mut rng, 4));
    let e1 = grad_check_soft_dtw(&a, &b, 0.5, 1e-4).unwrap();
    let e2 = grad_check_soft_dtw(&a, &b, 0.5, 5e-5).unwrap();
    assert!(e2 <= 4.0 * e1 + 1e-9);
}

proptest! {
    #[test]
    fn soft_dtw_is_symmetric(
        a in prop::collection::vec(-3.0f64..3.0, 1..7),
        b in prop::collection::vec(-3.0f64..3.0, 1..7),
    ) {
        let cfg = SoftDtwConfig { gamma: 0.1 };
        let ab = soft_dtw(&a, &b, cfg).unwrap().value;
        let ba = soft_dtw(&b, &a, cfg).unwrap().value;
        prop_assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn soft_dtw_below_hard(
        a in prop::collection::vec(-3.0f64..3.0, 1..7),
        b in prop::collection::vec(-3.0f64..3.0, 1..7),
    ) {
        let soft = soft_dtw(&a, &b, SoftDtwConfig { gamma: 0.3 }).unwrap().value;
        prop_assert!(soft <= dtw_by_paths(&a, &b) + 1e-12);
    }

    #[test]
    fn emd_matches_transport_plan(seed in 0u64..10_000, b in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q) = (simplex(&mut rng, b), simplex(&mut rng, b));
        let v = emd_1d(&p, &q).unwrap().value;
        prop_assert!((v - emd_by_transport(&p, &q)).abs() < 1e-9);
        prop_assert!((v - emd_1d(&q, &p).unwrap().value).abs() < 1e-12);
        prop_assert!(emd_1d(&p, &p).unwrap().value.abs() < 1e-12);
    }
}
