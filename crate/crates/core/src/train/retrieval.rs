//! Cross-modal retrieval metrics.
//!
//! Each query ranks every candidate by dot product, highest first; equal
//! scores are ordered by candidate index. The true pair of query `i` is
//! candidate `i`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, Matrix};

pub const RECALL_KS: [usize; 3] = [1, 5, 10];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    MusicToMotion,
    MotionToMusic,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::MusicToMotion => "music->motion",
            Direction::MotionToMusic => "motion->music",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub direction: Direction,
    /// Percentage of queries whose true pair ranks within the top K.
    pub recall_at: BTreeMap<usize, f64>,
    pub median_rank: f64,
}

impl RetrievalReport {
    pub fn r_at(&self, k: usize) -> f64 {
        self.recall_at.get(&k).copied().unwrap_or(f64::NAN)
    }
}

/// `sim[q][c] = <queries_q, candidates_c>`.
pub fn similarity_matrix(queries: &Matrix, candidates: &Matrix) -> Result<Matrix> {
    if queries.cols() != candidates.cols() {
        return Err(Error::shape("candidates", format!("{} columns", queries.cols()), candidates.cols()));
    }
    if queries.rows() != candidates.rows() {
        return Err(Error::shape("candidates", format!("{} rows", queries.rows()), candidates.rows()));
    }
    let n = queries.rows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|q| (0..n).map(|c| dot(queries.row(q), candidates.row(c))).collect())
        .collect();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    Matrix::from_rows(&rows)
}

/// 1-based rank of the true pair for each query, by sorting candidates.
pub fn true_pair_ranks(sim: &Matrix) -> Vec<usize> {
    (0..sim.rows())
        .map(|q| {
            let row = sim.row(q);
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            order.iter().position(|&c| c == q).unwrap() + 1
        })
        .collect()
}

/// Same ranks computed without sorting: one plus the number of candidates
/// that beat the true pair under the tie-breaking rule.
pub fn true_pair_ranks_by_counting(sim: &Matrix) -> Vec<usize> {
    let mut ranks = Vec::with_capacity(sim.rows());
    for q in 0..sim.rows() {
        let target = sim.get(q, q);
        let mut ahead = 0;
        for c in 0..sim.cols() {
            let s = sim.get(q, c);
            if s > target || (s == target && c < q) {
                ahead += 1;
            }
        }
        ranks.push(ahead + 1);
    }
    ranks
}

pub fn median(values: &[usize]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

pub fn report_from_ranks(direction: Direction, ranks: &[usize]) -> RetrievalReport {
    let n = ranks.len() as f64;
    let recall_at = RECALL_KS
        .iter()
        .map(|&k| (k, 100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / n))
        .collect();
    RetrievalReport {
        direction,
        recall_at,
        median_rank: median(ranks),
    }
}

pub fn eval_retrieval(audio: &Matrix, motion: &Matrix, direction: Direction) -> Result<RetrievalReport> {
    if audio.rows() == 0 {
        return Err(Error::domain("retrieval needs at least one pair"));
    }
    let sim = match direction {
        Direction::MusicToMotion => similarity_matrix(audio, motion)?,
        Direction::MotionToMusic => similarity_matrix(motion, audio)?,
    };
    Ok(report_from_ranks(direction, &true_pair_ranks(&sim)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_retrieval_is_perfect() {
        let mut z = Matrix::zeros(12, 12);
        for i in 0..12 {
            z.set(i, i, 1.0);
        }
        let r = eval_retrieval(&z, &z, Direction::MusicToMotion).unwrap();
        assert_eq!(r.r_at(1), 100.0);
        assert_eq!(r.median_rank, 1.0);
    }

    #[test]
    fn hand_built_ranks() {
        let sim = Matrix::from_rows(&[
            vec![0.9, 0.1, 0.3],
            vec![0.8, 0.5, 0.5],
            vec![0.2, 0.7, 0.1],
        ])
        .unwrap();
        // query 1 ties candidate 2 but wins on index
        assert_eq!(true_pair_ranks(&sim), vec![1, 2, 3]);
        assert_eq!(true_pair_ranks_by_counting(&sim), vec![1, 2, 3]);
        let r = report_from_ranks(Direction::MusicToMotion, &[1, 2, 3]);
        assert!((r.r_at(1) - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.r_at(5), 100.0);
        assert_eq!(r.median_rank, 2.0);
    }

    #[test]
    fn even_median_averages() {
        assert_eq!(median(&[4, 1, 3, 2]), 2.5);
    }
}
