mod common;

use vehpred::estimate::horizon_predictions;
use vehpred::sim::LapLayout;
use vehpred::{
    horizon_error, run_estimate, simulate, synthesize_sensors, EstimateOptions, EstimatorModel, Pose, Scenario,
    SensorNoise,
};

fn options(model: EstimatorModel) -> EstimateOptions {
    EstimateOptions {
        model,
        ..Default::default()
    }
}

#[test]
fn velocity_error_below_measurement_noise() {
    let cfg = common::config();
    let layout = LapLayout {
        laps: 3,
        ..LapLayout::rounded_rectangle(1.0)
    };
    let sc = Scenario::lap(&cfg.params, 1.0, &layout, common::DT_TRUTH, cfg.delta_max).unwrap();
    assert!(sc.duration >= 60.0);
    let truth = simulate(&sc, &cfg.params, common::DT_TRUTH).unwrap();
    let noise = SensorNoise {
        seed: 5,
        ..Default::default()
    };
    let sensors = synthesize_sensors(&truth, &noise, cfg.dt).unwrap();
    let run = run_estimate(&sensors, &cfg, &options(EstimatorModel::DynamicEkf)).unwrap();
    let half = run.records.len() / 2;
    let (mut se_vx, mut se_r) = (0.0, 0.0);
    for (k, rec) in run.records.iter().enumerate().skip(half) {
        let tr = &truth[k * 10];
        assert_eq!(tr.t, sensors[k].t);
        se_vx += (rec.vel.v_x - tr.vel.v_x).powi(2);
        se_r += (rec.vel.psi_dot - tr.vel.psi_dot).powi(2);
    }
    let n = (run.records.len() - half) as f64;
    let (rms_vx, rms_r) = ((se_vx / n).sqrt(), (se_r / n).sqrt());
    assert!(rms_vx < noise.sigma_vx, "v_x rms {rms_vx}");
    assert!(rms_r < noise.sigma_psidot, "yaw-rate rms {rms_r}");
}

fn noiseless_closure(radius: f64) -> f64 {
    let cfg = common::config();
    let layout = LapLayout::with_corner_radius(1.0, radius);
    let sc = Scenario::lap(&cfg.params, 1.0, &layout, common::DT_TRUTH, cfg.delta_max).unwrap();
    let truth = simulate(&sc, &cfg.params, common::DT_TRUTH).unwrap();
    let sensors = synthesize_sensors(&truth, &SensorNoise::noiseless(), cfg.dt).unwrap();
    let est = run_estimate(&sensors, &cfg, &options(EstimatorModel::DynamicEkf)).unwrap();
    est.closure.unwrap().closure_per_meter
}

#[test]
fn noiseless_lap_closes_with_dynamic_filter() {
    let c = noiseless_closure(5.0);
    assert!(c < 1e-4, "closure {c} m/m");
}

#[test]
fn noiseless_closure_grows_with_steering_angle() {
    // the one-step model uses small-angle tyre geometry, so tighter corners
    // leave a yaw-rate bias the filter only partly removes
    let wide = noiseless_closure(5.0);
    let medium = noiseless_closure(3.0);
    let tight = noiseless_closure(1.5);
    assert!(wide < medium && medium < tight, "{wide} {medium} {tight}");
    assert!(tight < 1e-3, "{tight}");
}

#[test]
fn kinematic_model_closes_worse_in_slipping_corners() {
    let run = common::lap_run(2.0, &SensorNoise::noiseless());
    let cfg = common::config();
    let dynamic = run_estimate(&run.sensors, &cfg, &options(EstimatorModel::DynamicEkf)).unwrap();
    let kinematic = run_estimate(&run.sensors, &cfg, &options(EstimatorModel::Kinematic)).unwrap();
    let (d, k) = (
        dynamic.closure.unwrap().closure_per_meter,
        kinematic.closure.unwrap().closure_per_meter,
    );
    assert!(k > d, "kinematic {k} vs dynamic {d}");
}

#[test]
fn estimation_is_deterministic() {
    let noise = SensorNoise {
        seed: 9,
        ..Default::default()
    };
    let a = common::lap_run(1.0, &noise);
    let b = common::lap_run(1.0, &noise);
    assert_eq!(a.sensors, b.sensors);
    let cfg = common::config();
    for model in [EstimatorModel::DynamicEkf, EstimatorModel::Kinematic] {
        let ra = run_estimate(&a.sensors, &cfg, &options(model)).unwrap();
        let rb = run_estimate(&b.sensors, &cfg, &options(model)).unwrap();
        assert_eq!(ra, rb);
    }
}

#[test]
fn horizon_of_truth_against_itself_is_zero() {
    let run = common::lap_run(1.0, &SensorNoise::noiseless());
    let truth: Vec<(f64, Pose)> = run.sensors.iter().map(|r| r.t).zip(run.truth_poses.iter().copied()).collect();
    for n in [1, 7, 50] {
        assert_eq!(horizon_error(&truth, &truth, n).unwrap().mean_error, 0.0);
    }
}

#[test]
fn dynamic_horizon_beats_kinematic_at_speed() {
    let cfg = common::config();
    let run = common::lap_run(2.0, &SensorNoise::default());
    let truth: Vec<(f64, Pose)> = run.sensors.iter().map(|r| r.t).zip(run.truth_poses.iter().copied()).collect();
    let err = |model| {
        let pred = horizon_predictions(&run.sensors, &run.truth_poses, &cfg, model, 7).unwrap();
        horizon_error(&pred, &truth, 7).unwrap().mean_error
    };
    let (d, k) = (err(EstimatorModel::DynamicEkf), err(EstimatorModel::Kinematic));
    assert!(d < 1e-3, "{d}");
    assert!(d < k, "dynamic {d} vs kinematic {k}");
}
