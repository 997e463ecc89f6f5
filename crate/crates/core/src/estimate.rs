//! Replaying sensor logs through the estimators.

use std::hint::black_box;
use std::time::{Duration, Instant};

use crate::config::Config;
use crate::ekf::FilterEstimate;
use crate::error::{Error, Result};
use crate::metrics::{closure_metrics, ClosureMetrics};
use crate::models::{kinematic_step, kinematic_yaw_rate};
use crate::sim::SensorRecord;
use crate::types::{ControlInput, Measurement, Pose, VelocityState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorModel {
    /// Dynamic single-track model fused with the measurements by the EKF.
    #[default]
    DynamicEkf,
    /// Kinematic dead reckoning from measured speed and steering.
    Kinematic,
}

impl EstimatorModel {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorModel::DynamicEkf => "dynamic-ekf",
            EstimatorModel::Kinematic => "kinematic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "dynamic-ekf" => Some(EstimatorModel::DynamicEkf),
            "kinematic" => Some(EstimatorModel::Kinematic),
            _ => None,
        }
    }
}

/// An external absolute pose (e.g. from the camera).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseFix {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimateOptions {
    pub model: EstimatorModel,
    pub initial_pose: Pose,
    /// Pose fixes applied after the step whose timestamp they match.
    pub pose_resets: Vec<PoseFix>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub t: f64,
    pub pose: Pose,
    pub vel: VelocityState,
    /// Diagonal of the velocity covariance; `None` for the kinematic model.
    pub p_diag: Option<[f64; 3]>,
}

impl From<&EstimateRecord> for crate::io::EstimateRow {
    fn from(r: &EstimateRecord) -> Self {
        crate::io::EstimateRow {
            t_s: r.t,
            x_m: r.pose.x,
            y_m: r.pose.y,
            psi_rad: r.pose.psi,
            v_x_mps: r.vel.v_x,
            v_y_mps: r.vel.v_y,
            psidot_radps: r.vel.psi_dot,
            var_v_x: r.p_diag.map(|p| p[0]),
            var_v_y: r.p_diag.map(|p| p[1]),
            var_psidot: r.p_diag.map(|p| p[2]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRun {
    pub model: EstimatorModel,
    pub records: Vec<EstimateRecord>,
    /// `None` when the estimated path has zero length.
    pub closure: Option<ClosureMetrics>,
}

impl EstimateRun {
    pub fn poses(&self) -> Vec<Pose> {
        self.records.iter().map(|r| r.pose).collect()
    }
}

fn check_grid(rows: &[SensorRecord], dt: f64) -> Result<()> {
    for (k, w) in rows.windows(2).enumerate() {
        let step = w[1].t - w[0].t;
        if (step - dt).abs() > 1e-6 * dt {
            return Err(Error::GridMismatch(format!(
                "step of {step} s between rows {k} and {}, filter expects {dt} s",
                k + 1
            ))
            .at_row(k + 1));
        }
    }
    Ok(())
}

fn initial_estimate(first: &SensorRecord, pose: Pose, cfg: &Config) -> FilterEstimate {
    let vel = VelocityState::new(
        first.v_x_meas.unwrap_or(0.0),
        0.0,
        first.psidot_meas.unwrap_or(0.0),
    );
    FilterEstimate::initial(vel, pose, first.t, cfg)
}

/// Filter estimates after each row (after the measurement update, before
/// any pose reset).
fn ekf_trace(
    rows: &[SensorRecord],
    cfg: &Config,
    initial_pose: Pose,
    resets: &[PoseFix],
) -> Result<Vec<FilterEstimate>> {
    let mut est = initial_estimate(&rows[0], initial_pose, cfg);
    let mut out = Vec::with_capacity(rows.len());
    let mut resets = resets.iter().peekable();
    let tol = 0.5 * cfg.dt;
    for (k, row) in rows.iter().enumerate() {
        if k > 0 {
            let z = row.measurement();
            est = est
                .step(&rows[k - 1].input(), z.as_ref(), cfg)
                .map_err(|e| e.at_row(k))?;
            est.t = row.t;
        }
        out.push(est);
        while let Some(fix) = resets.next_if(|f| f.t <= row.t + tol) {
            if (fix.t - row.t).abs() <= tol {
                est = est.reset_pose(fix.pose);
            }
        }
    }
    Ok(out)
}

fn kinematic_trace(rows: &[SensorRecord], cfg: &Config, initial_pose: Pose, resets: &[PoseFix]) -> Vec<EstimateRecord> {
    let mut pose = initial_pose;
    let mut v_x = rows[0].v_x_meas.unwrap_or(0.0);
    let mut out = Vec::with_capacity(rows.len());
    let mut resets = resets.iter().peekable();
    let tol = 0.5 * cfg.dt;
    for (k, row) in rows.iter().enumerate() {
        if k > 0 {
            pose = kinematic_step(&pose, v_x, rows[k - 1].delta, &cfg.params, cfg.dt);
        }
        if let Some(v) = row.v_x_meas {
            v_x = v;
        }
        out.push(EstimateRecord {
            t: row.t,
            pose,
            vel: VelocityState::new(v_x, 0.0, kinematic_yaw_rate(v_x, row.delta, &cfg.params)),
            p_diag: None,
        });
        while let Some(fix) = resets.next_if(|f| f.t <= row.t + tol) {
            if (fix.t - row.t).abs() <= tol {
                pose = fix.pose;
            }
        }
    }
    out
}

/// Runs the chosen estimator over a sensor log sampled at `cfg.dt`.
///
/// The step from row `k - 1` to row `k` uses the input of row `k - 1`
/// (zero-order hold) and the measurement of row `k` when present.
pub fn run_estimate(rows: &[SensorRecord], cfg: &Config, opts: &EstimateOptions) -> Result<EstimateRun> {
    if rows.len() < 2 {
        return Err(Error::EmptyTrajectory);
    }
    check_grid(rows, cfg.dt)?;
    let mut resets = opts.pose_resets.clone();
    resets.sort_by(|a, b| a.t.total_cmp(&b.t));
    let records = match opts.model {
        EstimatorModel::DynamicEkf => {
            // the trace holds pre-reset estimates; replay resets into the pose column
            ekf_trace(rows, cfg, opts.initial_pose, &resets)?
                .iter()
                .map(|e| EstimateRecord {
                    t: e.t,
                    pose: e.pose,
                    vel: e.vel,
                    p_diag: Some([e.p[(0, 0)], e.p[(1, 1)], e.p[(2, 2)]]),
                })
                .collect()
        }
        EstimatorModel::Kinematic => kinematic_trace(rows, cfg, opts.initial_pose, &resets),
    };
    let poses: Vec<Pose> = records.iter().map(|r| r.pose).collect();
    let closure = match closure_metrics(&poses) {
        Ok(m) => Some(m),
        Err(Error::ZeroPath) => None,
        Err(e) => return Err(e),
    };
    Ok(EstimateRun {
        model: opts.model,
        records,
        closure,
    })
}

/// n-step-ahead pose predictions, aligned with the rows.
///
/// For every row `k` the estimator state is taken at `k`, its pose replaced
/// by `truth[k]` (a camera fix), and propagated `n` steps without
/// measurements; the result is stored at index `k + n`. The first `n`
/// entries repeat the truth. Feed the output to
/// [`crate::metrics::horizon_error`].
pub fn horizon_predictions(
    rows: &[SensorRecord],
    truth: &[Pose],
    cfg: &Config,
    model: EstimatorModel,
    n: usize,
) -> Result<Vec<(f64, Pose)>> {
    if rows.len() != truth.len() {
        return Err(Error::GridMismatch(format!(
            "{} sensor rows but {} truth poses",
            rows.len(),
            truth.len()
        )));
    }
    if rows.len() < 2 {
        return Err(Error::EmptyTrajectory);
    }
    check_grid(rows, cfg.dt)?;
    let mut out: Vec<(f64, Pose)> = rows.iter().zip(truth).map(|(r, p)| (r.t, *p)).collect();
    match model {
        EstimatorModel::DynamicEkf => {
            let trace = ekf_trace(rows, cfg, truth[0], &[])?;
            for k in 0..rows.len().saturating_sub(n) {
                let mut fork = trace[k].reset_pose(truth[k]);
                for j in 0..n {
                    fork = fork.predict(&rows[k + j].input(), cfg).map_err(|e| e.at_row(k + j))?;
                }
                out[k + n].1 = fork.pose;
            }
        }
        EstimatorModel::Kinematic => {
            let mut v_x = rows[0].v_x_meas.unwrap_or(0.0);
            for k in 0..rows.len().saturating_sub(n) {
                if let Some(v) = rows[k].v_x_meas {
                    v_x = v;
                }
                let mut pose = truth[k];
                for j in 0..n {
                    pose = kinematic_step(&pose, v_x, rows[k + j].delta, &cfg.params, cfg.dt);
                }
                out[k + n].1 = pose;
            }
        }
    }
    Ok(out)
}

/// Picks the truth samples whose timestamps match `times` (within a
/// millionth of the smallest step).
pub fn align_to_times(truth: &[(f64, Pose)], times: &[f64]) -> Result<Vec<Pose>> {
    let step = truth
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .fold(f64::INFINITY, f64::min);
    let tol = if step.is_finite() { 1e-6 * step } else { 1e-9 };
    let mut j = 0;
    times
        .iter()
        .map(|&t| {
            while j < truth.len() && truth[j].0 < t - tol {
                j += 1;
            }
            match truth.get(j) {
                Some(&(tt, pose)) if (tt - t).abs() <= tol => Ok(pose),
                _ => Err(Error::GridMismatch(format!("no truth sample at t = {t}"))),
            }
        })
        .collect()
}

/// Mean wall time of one predict + correct cycle.
pub fn bench_cycle(cfg: &Config, iterations: usize) -> Result<Duration> {
    let iterations = iterations.max(1);
    let mut est = FilterEstimate::initial(VelocityState::new(1.5, 0.0, 0.0), Pose::origin(), 0.0, cfg);
    let mut total = Duration::ZERO;
    for i in 0..iterations {
        let phase = i as f64 * 1e-3;
        let u = ControlInput::new(0.2 * phase.sin(), 0.1 * phase.cos());
        let z = Measurement::new(0.5 * phase.sin(), 1.5 + 0.05 * phase.cos());
        let start = Instant::now();
        est = black_box(est).step(black_box(&u), Some(black_box(&z)), cfg)?;
        total += start.elapsed();
    }
    black_box(&est);
    Ok(total / iterations as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::VehicleParams;

    fn cfg() -> Config {
        Config::new(VehicleParams::new(4.0, 0.16, 0.20, 0.05, 50.0, 50.0).unwrap())
    }

    fn straight_rows(n: usize) -> Vec<SensorRecord> {
        (0..n)
            .map(|k| SensorRecord {
                t: k as f64 * 0.005,
                delta: 0.0,
                a_x: 0.0,
                a_y: 0.0,
                v_x_meas: Some(1.0),
                psidot_meas: Some(0.0),
            })
            .collect()
    }

    #[test]
    fn empty_log_is_rejected() {
        assert!(matches!(
            run_estimate(&[], &cfg(), &EstimateOptions::default()),
            Err(Error::EmptyTrajectory)
        ));
    }

    #[test]
    fn straight_log_moves_along_x() {
        let run = run_estimate(&straight_rows(201), &cfg(), &EstimateOptions::default()).unwrap();
        let last = run.records.last().unwrap();
        assert!((last.pose.x - 1.0).abs() < 1e-9);
        assert_eq!(last.pose.y, 0.0);
        assert!(run.closure.unwrap().closure_per_meter > 0.99);
        let kin = run_estimate(
            &straight_rows(201),
            &cfg(),
            &EstimateOptions {
                model: EstimatorModel::Kinematic,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((kin.records.last().unwrap().pose.x - 1.0).abs() < 1e-9);
        assert!(kin.records[0].p_diag.is_none());
    }

    #[test]
    fn pose_reset_applies_at_matching_row() {
        let opts = EstimateOptions {
            pose_resets: vec![PoseFix {
                t: 0.5,
                pose: Pose::new(10.0, 0.0, 0.0),
            }],
            ..Default::default()
        };
        let run = run_estimate(&straight_rows(201), &cfg(), &opts).unwrap();
        // row 100 is at t = 0.5: its record is pre-reset, the next one starts from the fix
        assert!((run.records[100].pose.x - 0.5).abs() < 1e-9);
        assert!((run.records[101].pose.x - 10.005).abs() < 1e-9);
    }

    #[test]
    fn grid_mismatch_names_row() {
        let mut rows = straight_rows(10);
        rows[5].t += 0.001;
        match run_estimate(&rows, &cfg(), &EstimateOptions::default()) {
            Err(Error::AtRow { row: 5, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn filter_error_names_row() {
        let mut rows = straight_rows(10);
        rows[3].delta = 1.0;
        match run_estimate(&rows, &cfg(), &EstimateOptions::default()) {
            Err(Error::AtRow { row: 4, source }) => {
                assert!(matches!(*source, Error::SteeringOutOfRange { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn align_picks_matching_samples() {
        let truth: Vec<(f64, Pose)> = (0..100).map(|i| (i as f64 * 0.0005, Pose::new(i as f64, 0.0, 0.0))).collect();
        let poses = align_to_times(&truth, &[0.0, 0.005, 0.01]).unwrap();
        assert_eq!(poses.iter().map(|p| p.x).collect::<Vec<_>>(), vec![0.0, 10.0, 20.0]);
        assert!(align_to_times(&truth, &[0.00025]).is_err());
    }
}
