//! Trajectory validation metrics.

use crate::error::{Error, Result};
use crate::types::{wrap_angle, Pose};

/// How far a trajectory that should have returned to its start fails to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureMetrics {
    pub path_length: f64,
    /// Distance between the last and the first position, m.
    pub position_closure: f64,
    /// `position_closure / path_length`.
    pub closure_per_meter: f64,
    /// Absolute wrapped heading difference between last and first pose, rad.
    pub yaw_closure: f64,
}

pub fn closure_metrics(traj: &[Pose]) -> Result<ClosureMetrics> {
    let (first, last) = match traj {
        [first, .., last] => (first, last),
        _ => return Err(Error::EmptyTrajectory),
    };
    let path_length: f64 = traj.windows(2).map(|w| w[0].distance_to(&w[1])).sum();
    if !(path_length > 0.0) {
        return Err(Error::ZeroPath);
    }
    let position_closure = last.distance_to(first);
    Ok(ClosureMetrics {
        path_length,
        position_closure,
        closure_per_meter: position_closure / path_length,
        yaw_closure: wrap_angle(last.psi - first.psi).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonStats {
    pub horizon_steps: usize,
    /// Number of compared samples.
    pub samples: usize,
    pub mean_error: f64,
    pub max_error: f64,
}

/// Position error of n-step-ahead predictions.
///
/// `est[k]` is the pose predicted for `truth[k]` from the state at `k - n`,
/// so only indices `k >= n` are compared. Both logs must share the same
/// time grid.
pub fn horizon_error(est: &[(f64, Pose)], truth: &[(f64, Pose)], n: usize) -> Result<HorizonStats> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be at least one step".into()));
    }
    if est.len() != truth.len() {
        return Err(Error::GridMismatch(format!(
            "estimate has {} samples, truth has {}",
            est.len(),
            truth.len()
        )));
    }
    if truth.len() <= n {
        return Err(Error::EmptyTrajectory);
    }
    let dt = (truth[truth.len() - 1].0 - truth[0].0) / (truth.len() - 1) as f64;
    let tol = 1e-6 * dt.abs().max(1e-9);
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for (k, (e, t)) in est.iter().zip(truth).enumerate() {
        if (e.0 - t.0).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "timestamps differ at sample {k}: {} vs {}",
                e.0, t.0
            )));
        }
        if k < n {
            continue;
        }
        let err = e.1.distance_to(&t.1);
        sum += err;
        max = max.max(err);
    }
    let samples = truth.len() - n;
    Ok(HorizonStats {
        horizon_steps: n,
        samples,
        mean_error: sum / samples as f64,
        max_error: max,
    })
}
