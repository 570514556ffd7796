//! Earth mover's distance between distributions over the positions of a bar,
//! with ground metric `|i - j|`.

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct EmdResult {
    pub value: f64,
    /// Subgradient with respect to `p`.
    pub grad_p: Vec<f64>,
}

fn on_simplex(v: &[f64], name: &str) -> Result<Vec<f64>> {
    if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::domain(format!("{name} has a negative or non-finite entry")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() <= SIMPLEX_TOL {
        Ok(v.to_vec())
    } else if sum > 0.0 {
        Ok(v.iter().map(|x| x / sum).collect())
    } else {
        Err(Error::domain(format!("{name} has zero mass")))
    }
}

/// Closed form `sum_k |CDF_p(k) - CDF_q(k)|` over the first `B - 1` prefixes.
pub fn emd_1d(p: &[f64], q: &[f64]) -> Result<EmdResult> {
    if p.len() != q.len() {
        return Err(Error::shape("q", p.len(), q.len()));
    }
    if p.is_empty() {
        return Err(Error::domain("EMD inputs must be non-empty"));
    }
    let p = on_simplex(p, "p")?;
    let q = on_simplex(q, "q")?;
    let b = p.len();

    let mut signs = vec![0.0; b];
    let mut cdf_gap = 0.0;
    let mut value = 0.0;
    for k in 0..b - 1 {
        cdf_gap += p[k] - q[k];
        value += cdf_gap.abs();
        signs[k] = if cdf_gap > 0.0 {
            1.0
        } else if cdf_gap < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    // p[i] enters every prefix k >= i
    let mut grad_p = vec![0.0; b];
    let mut acc = 0.0;
    for i in (0..b).rev() {
        acc += signs[i];
        grad_p[i] = acc;
    }
    Ok(EmdResult { value, grad_p })
}

/// Transport cost of the monotone (north-west corner) coupling, which is
/// optimal on the line. Ships mass bin by bin and charges `|i - j|` per unit.
pub fn emd_oracle(p: &[f64], q: &[f64]) -> f64 {
    let mut supply = p.to_vec();
    let mut demand = q.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut cost = 0.0;
    while i < supply.len() && j < demand.len() {
        let moved = supply[i].min(demand[j]);
        cost += moved * (i as f64 - j as f64).abs();
        supply[i] -= moved;
        demand[j] -= moved;
        if supply[i] <= demand[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(emd_1d(&p, &p).unwrap().value, 0.0);
        assert_eq!(emd_oracle(&p, &p), 0.0);
    }

    #[test]
    fn corner_to_corner() {
        let r = emd_1d(&[1., 0., 0., 0.], &[0., 0., 0., 1.]).unwrap();
        assert!((r.value - 3.0).abs() < 1e-15);
        assert_eq!(emd_oracle(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
    }

    #[test]
    fn half_shift() {
        let r = emd_1d(&[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_mass_rejected() {
        assert!(emd_1d(&[1.2, -0.2], &[0.5, 0.5]).is_err());
        assert!(emd_1d(&[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn off_simplex_inputs_are_renormalized() {
        let a = emd_1d(&[2.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!((a.value - 2.0).abs() < 1e-15);
    }
}
