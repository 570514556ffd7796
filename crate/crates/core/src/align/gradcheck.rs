//! Central finite-difference checks of the kernel gradients.

use crate::align::emd::emd_1d;
use crate::align::soft_dtw::{soft_dtw, SoftDtwConfig};
use crate::error::Result;

/// `|a - b| / (|a| + |b| + 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-8)
}

fn central_difference(x: &[f64], i: usize, h: f64, f: &dyn Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[i] += h;
    minus[i] -= h;
    Ok((f(&plus)? - f(&minus)?) / (2.0 * h))
}

/// Largest relative error over every coordinate of both soft-DTW inputs.
pub fn grad_check_soft_dtw(a: &[f64], b: &[f64], gamma: f64, h: f64) -> Result<f64> {
    let cfg = SoftDtwConfig { gamma };
    let r = soft_dtw(a, b, cfg)?;
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        let fd = central_difference(a, i, h, &|x| Ok(soft_dtw(x, b, cfg)?.value))?;
        worst = worst.max(relative_error(r.grad_a[i], fd));
    }
    for j in 0..b.len() {
        let fd = central_difference(b, j, h, &|y| Ok(soft_dtw(a, y, cfg)?.value))?;
        worst = worst.max(relative_error(r.grad_b[j], fd));
    }
    Ok(worst)
}

/// Smallest `|CDF_p(k) - CDF_q(k)|` over the interior prefixes; the EMD is
/// differentiable when this is positive.
pub fn cdf_gap(p: &[f64], q: &[f64]) -> f64 {
    let (mut cp, mut cq) = (0.0, 0.0);
    let mut gap = f64::INFINITY;
    for k in 0..p.len().saturating_sub(1) {
        cp += p[k];
        cq += q[k];
        gap = gap.min((cp - cq).abs());
    }
    gap
}

/// Largest relative error of the EMD gradient with respect to `p`. Steps stay
/// below the simplex tolerance so no renormalization kicks in.
pub fn grad_check_emd(p: &[f64], q: &[f64], h: f64) -> Result<f64> {
    let r = emd_1d(p, q)?;
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let fd = central_difference(p, i, h, &|x| Ok(emd_1d(x, q)?.value))?;
        worst = worst.max(relative_error(r.grad_p[i], fd));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_pass_their_own_check() {
        let a = [0.3, -0.2, 0.9, 0.4];
        let b = [0.1, 0.5, 0.6];
        assert!(grad_check_soft_dtw(&a, &b, 0.1, 1e-5).unwrap() < 1e-4);
        let p = [0.1, 0.4, 0.2, 0.3];
        let q = [0.3, 0.1, 0.5, 0.1];
        assert!(cdf_gap(&p, &q) > 1e-3);
        assert!(grad_check_emd(&p, &q, 1e-8).unwrap() < 1e-4);
    }
}
