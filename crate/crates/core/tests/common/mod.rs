#![allow(dead_code)]

use vehpred::estimate::align_to_times;
use vehpred::sim::{LapLayout, Scenario};
use vehpred::{simulate, synthesize_sensors, Config, Pose, SensorNoise, SensorRecord, TruthRecord, VehicleParams};

pub const DT_TRUTH: f64 = 5e-4;

/// Slightly understeering test vehicle.
pub fn vehicle() -> VehicleParams {
    VehicleParams::new(4.0, 0.16, 0.20, 0.05, 50.0, 50.0).unwrap()
}

pub fn config() -> Config {
    Config::new(vehicle())
}

pub struct LapRun {
    pub truth: Vec<TruthRecord>,
    pub sensors: Vec<SensorRecord>,
    /// Truth poses on the sensor grid.
    pub truth_poses: Vec<Pose>,
}

pub fn lap_run(v: f64, noise: &SensorNoise) -> LapRun {
    let cfg = config();
    let sc = Scenario::lap(&cfg.params, v, &LapLayout::rounded_rectangle(v), DT_TRUTH, cfg.delta_max).unwrap();
    let truth = simulate(&sc, &cfg.params, DT_TRUTH).unwrap();
    let sensors = synthesize_sensors(&truth, noise, cfg.dt).unwrap();
    let stamped: Vec<(f64, Pose)> = truth.iter().map(|r| (r.t, r.pose)).collect();
    let times: Vec<f64> = sensors.iter().map(|r| r.t).collect();
    let truth_poses = align_to_times(&stamped, &times).unwrap();
    LapRun {
        truth,
        sensors,
        truth_poses,
    }
}
