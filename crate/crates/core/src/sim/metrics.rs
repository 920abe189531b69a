use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ExecutedTrajectory;

/// Smoothness and efficiency of an executed trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean absolute finite-difference acceleration of the linear speed, m/s².
    pub avg_accel: f64,
    /// Mean absolute finite-difference jerk of the linear speed, m/s³.
    pub avg_jerk: f64,
    /// Sum of `v_i * dt`, m.
    pub path_length: f64,
    /// Smallest sampled obstacle distance, m.
    pub min_obstacle_distance: f64,
}

#[derive(Debug, Error, PartialEq)]
#[error("metrics need at least 3 controls, got {0}")]
pub struct MetricsError(pub usize);

/// Metrics from the applied speeds `v_i`:
/// `a_i = (v_{i+1} - v_i) / dt`, `j_i = (a_{i+1} - a_i) / dt`.
pub fn compute_metrics(traj: &ExecutedTrajectory) -> Result<Metrics, MetricsError> {
    let n = traj.controls.len();
    if n < 3 {
        return Err(MetricsError(n));
    }
    let dt = traj.dt;
    let accel: Vec<f64> = traj
        .controls
        .windows(2)
        .map(|w| (w[1].v - w[0].v) / dt)
        .collect();
    let jerk: Vec<f64> = accel.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    let mean_abs = |xs: &[f64]| xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64;
    Ok(Metrics {
        avg_accel: mean_abs(&accel),
        avg_jerk: mean_abs(&jerk),
        path_length: traj.controls.iter().map(|u| u.v * dt).sum(),
        min_obstacle_distance: traj.d_obs.iter().copied().fold(f64::INFINITY, f64::min),
    })
}
