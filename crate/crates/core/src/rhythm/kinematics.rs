use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rhythm::grid::BeatGrid;
use crate::rhythm::pooling::{assign_frames, pool_per_beat};
use crate::tensor::Matrix;

/// Joint positions for one frame, `[x, y, z]` with `y` pointing up.
pub type Pose = Vec<[f64; 3]>;

/// Thresholds for the height+speed foot-contact heuristic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactHeuristic {
    /// Joint whose height and speed decide contact.
    pub end_effector: usize,
    pub height_threshold: f64,
    pub speed_threshold: f64,
}

impl Default for ContactHeuristic {
    fn default() -> Self {
        Self {
            end_effector: 0,
            height_threshold: 0.05,
            speed_threshold: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeatKinematics {
    /// `K x 9J`: per joint positions, velocities, accelerations.
    pub tokens: Matrix,
    /// Mean squared joint speed per beat.
    pub energy: Vec<f64>,
    /// Fraction of frames per beat in which the end effector is grounded and still.
    pub contacts: Vec<f64>,
}

/// Central finite differences, one-sided at the ends.
fn differentiate(values: &[[f64; 3]], times: &[f64]) -> Vec<[f64; 3]> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            let dt = times[b] - times[a];
            let mut d = [0.0; 3];
            for c in 0..3 {
                d[c] = if dt > 0.0 {
                    (values[b][c] - values[a][c]) / dt
                } else {
                    0.0
                };
            }
            d
        })
        .collect()
}

fn norm_sq(v: &[f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

pub fn motion_kinematics_per_beat(
    joint_positions: &[Pose],
    frame_times: &[f64],
    grid: &BeatGrid,
    heuristic: &ContactHeuristic,
) -> Result<BeatKinematics> {
    let n_frames = joint_positions.len();
    if n_frames < 3 {
        return Err(Error::domain(format!(
            "need at least 3 frames for accelerations, got {n_frames}"
        )));
    }
    if frame_times.len() != n_frames {
        return Err(Error::shape("frame_times", n_frames, frame_times.len()));
    }
    let joints = joint_positions[0].len();
    if joints == 0 {
        return Err(Error::domain("motion has no joints"));
    }
    if let Some(f) = joint_positions.iter().position(|p| p.len() != joints) {
        return Err(Error::shape(format!("joint_positions[{f}]"), joints, joint_positions[f].len()));
    }
    if heuristic.end_effector >= joints {
        return Err(Error::domain(format!(
            "end effector {} out of range for {joints} joints",
            heuristic.end_effector
        )));
    }

    // velocities[j][f], accelerations[j][f]
    let mut velocities = Vec::with_capacity(joints);
    let mut accelerations = Vec::with_capacity(joints);
    for j in 0..joints {
        let track: Vec<[f64; 3]> = joint_positions.iter().map(|p| p[j]).collect();
        let vel = differentiate(&track, frame_times);
        accelerations.push(differentiate(&vel, frame_times));
        velocities.push(vel);
    }

    let mut features = Matrix::zeros(n_frames, 9 * joints);
    let mut speed_sq = vec![0.0; n_frames];
    let mut grounded = vec![0.0; n_frames];
    for f in 0..n_frames {
        let row = features.row_mut(f);
        for j in 0..joints {
            let base = 9 * j;
            row[base..base + 3].copy_from_slice(&joint_positions[f][j]);
            row[base + 3..base + 6].copy_from_slice(&velocities[j][f]);
            row[base + 6..base + 9].copy_from_slice(&accelerations[j][f]);
            speed_sq[f] += norm_sq(&velocities[j][f]);
        }
        speed_sq[f] /= joints as f64;
        let e = heuristic.end_effector;
        let height = joint_positions[f][e][1];
        let speed = norm_sq(&velocities[e][f]).sqrt();
        if height < heuristic.height_threshold && speed < heuristic.speed_threshold {
            grounded[f] = 1.0;
        }
    }

    let tokens = pool_per_beat(&features, frame_times, grid)?;
    let buckets = assign_frames(frame_times, grid)?;
    let mean = |values: &[f64], idx: &[usize]| {
        idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
    };
    let energy = buckets.iter().map(|idx| mean(&speed_sq, idx)).collect();
    let contacts = buckets.iter().map(|idx| mean(&grounded, idx)).collect();
    Ok(BeatKinematics {
        tokens,
        energy,
        contacts,
    })
}
