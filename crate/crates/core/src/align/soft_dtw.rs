//! Soft dynamic time warping on scalar sequences with squared-difference cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftDtwConfig {
    /// Soft-min temperature; the hard DTW minimum is recovered as it goes to zero.
    pub gamma: f64,
}

impl Default for SoftDtwConfig {
    fn default() -> Self {
        Self { gamma: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    pub value: f64,
    pub grad_a: Vec<f64>,
    pub grad_b: Vec<f64>,
}

fn check_inputs(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("alignment inputs must be non-empty"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::domain("alignment inputs must be finite"));
    }
    Ok(())
}

/// `-gamma * ln(exp(-x/gamma) + exp(-y/gamma) + exp(-z/gamma))`, shifted by the max exponent.
fn soft_min3(x: f64, y: f64, z: f64, gamma: f64) -> f64 {
    let (rx, ry, rz) = (-x / gamma, -y / gamma, -z / gamma);
    let m = rx.max(ry).max(rz);
    let sum = (rx - m).exp() + (ry - m).exp() + (rz - m).exp();
    -gamma * (m + sum.ln())
}

pub fn soft_dtw(a: &[f64], b: &[f64], cfg: SoftDtwConfig) -> Result<AlignmentResult> {
    if !(cfg.gamma > 0.0 && cfg.gamma.is_finite()) {
        return Err(Error::domain(format!("soft-DTW gamma must be positive, got {}", cfg.gamma)));
    }
    check_inputs(a, b)?;
    let gamma = cfg.gamma;
    let (n, m) = (a.len(), b.len());
    let w = m + 2;
    let idx = |i: usize, j: usize| i * w + j;

    // 1-based cost and accumulated-cost tables padded by one row/column on each side.
    let mut cost = vec![0.0; (n + 2) * w];
    for i in 1..=n {
        for j in 1..=m {
            let d = a[i - 1] - b[j - 1];
            cost[idx(i, j)] = d * d;
        }
    }
    let mut r = vec![f64::INFINITY; (n + 2) * w];
    r[idx(0, 0)] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            r[idx(i, j)] = cost[idx(i, j)]
                + soft_min3(r[idx(i - 1, j - 1)], r[idx(i - 1, j)], r[idx(i, j - 1)], gamma);
        }
    }
    let value = r[idx(n, m)];

    // Backward pass: e[i][j] = d value / d r[i][j].
    for i in 1..=n {
        r[idx(i, m + 1)] = f64::NEG_INFINITY;
    }
    for j in 1..=m {
        r[idx(n + 1, j)] = f64::NEG_INFINITY;
    }
    r[idx(n + 1, m + 1)] = value;
    let mut e = vec![0.0; (n + 2) * w];
    e[idx(n + 1, m + 1)] = 1.0;
    for j in (1..=m).rev() {
        for i in (1..=n).rev() {
            let rij = r[idx(i, j)];
            let down = ((r[idx(i + 1, j)] - rij - cost[idx(i + 1, j)]) / gamma).exp();
            let right = ((r[idx(i, j + 1)] - rij - cost[idx(i, j + 1)]) / gamma).exp();
            let diag = ((r[idx(i + 1, j + 1)] - rij - cost[idx(i + 1, j + 1)]) / gamma).exp();
            e[idx(i, j)] = e[idx(i + 1, j)] * down + e[idx(i, j + 1)] * right + e[idx(i + 1, j + 1)] * diag;
        }
    }

    let mut grad_a = vec![0.0; n];
    let mut grad_b = vec![0.0; m];
    for i in 1..=n {
        for j in 1..=m {
            let g = 2.0 * e[idx(i, j)] * (a[i - 1] - b[j - 1]);
            grad_a[i - 1] += g;
            grad_b[j - 1] -= g;
        }
    }
    Ok(AlignmentResult {
        value,
        grad_a,
        grad_b,
    })
}

/// Exact DTW cost by the classic min-recursion.
pub fn hard_dtw_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut prev = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        let mut cur = vec![f64::INFINITY; m + 1];
        for j in 1..=m {
            let d = a[i - 1] - b[j - 1];
            cur[j] = d * d + prev[j - 1].min(prev[j]).min(cur[j - 1]);
        }
        prev = cur;
    }
    prev[m]
}

/// Costs of every monotone alignment path from `(0, 0)` to `(n-1, m-1)`.
/// Exponential; meant for sequences of a handful of elements.
pub fn alignment_path_costs(a: &[f64], b: &[f64]) -> Vec<f64> {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, out: &mut Vec<f64>) {
        let d = a[i] - b[j];
        let acc = acc + d * d;
        if i + 1 == a.len() && j + 1 == b.len() {
            out.push(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, out);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, out);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, out);
        }
    }
    let mut out = Vec::new();
    if !a.is_empty() && !b.is_empty() {
        walk(a, b, 0, 0, 0.0, &mut out);
    }
    out
}

/// Exact DTW cost as the minimum over enumerated paths.
pub fn hard_dtw_by_enumeration(a: &[f64], b: &[f64]) -> f64 {
    alignment_path_costs(a, b)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}
