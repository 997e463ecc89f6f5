mod common;

use vehpred::param_id::{
    cog_from_scale, cog_track, cornering_stiffness, drift_angle_series, AxleLoads, CorneringOptions, MarkerLayout,
};
use vehpred::sim::{circular_run_log, marker_log};
use vehpred::{simulate, Scenario, SensorNoise};

#[test]
fn optical_drift_angle_matches_simulator() {
    let params = common::vehicle();
    let truth = simulate(&Scenario::step_steer(6.0, 1.5, 1.0, 0.3), &params, common::DT_TRUTH).unwrap();
    let layout = MarkerLayout::new(0.12, 0.15);
    let markers = marker_log(&truth, &layout, 0.01, 0.0, 0).unwrap();
    let cog = cog_track(&markers, &layout).unwrap();
    let beta = drift_angle_series(&cog, 5).unwrap();
    let mut checked = 0;
    for s in beta.iter().filter(|s| s.t > 3.0) {
        let k = (s.t / common::DT_TRUTH).round() as usize;
        let tr = &truth[k];
        assert!((tr.t - s.t).abs() < 1e-9);
        let want = tr.vel.v_y.atan2(tr.vel.v_x);
        assert!((s.beta - want).abs() < 0.005, "t {}: {} vs {want}", s.t, s.beta);
        checked += 1;
    }
    assert!(checked > 200);
}

#[test]
fn cornering_stiffness_survives_millimetre_marker_noise() {
    let params = common::vehicle();
    let truth = simulate(&Scenario::steady_circle(8.0, 1.0, 0.2), &params, common::DT_TRUTH).unwrap();
    let layout = MarkerLayout::over_axles(&params);
    let noise = SensorNoise {
        seed: 21,
        ..SensorNoise::noiseless()
    };
    let run = circular_run_log(&truth, &layout, 0.01, 1e-3, &noise).unwrap();
    let est = cornering_stiffness(&run, params.m, params.l_v, params.l_h, &layout, &CorneringOptions::default()).unwrap();
    assert!((est.c_v - params.c_v).abs() / params.c_v < 0.25, "{est:?}");
    assert!((est.c_h - params.c_h).abs() / params.c_h < 0.25, "{est:?}");
}

#[test]
fn cornering_stiffness_noise_free_round_trip_for_unequal_axles() {
    let params = common::vehicle().with_stiffness_scale(1.5);
    let truth = simulate(&Scenario::steady_circle(8.0, 1.0, 0.25), &params, common::DT_TRUTH).unwrap();
    let layout = MarkerLayout::new(0.1, 0.1);
    let run = circular_run_log(&truth, &layout, 0.01, 0.0, &SensorNoise::noiseless()).unwrap();
    let est = cornering_stiffness(&run, params.m, params.l_v, params.l_h, &layout, &CorneringOptions::default()).unwrap();
    assert!((est.c_v - params.c_v).abs() / params.c_v < 0.10, "{est:?}");
    assert!((est.c_h - params.c_h).abs() / params.c_h < 0.10, "{est:?}");
}

#[test]
fn scale_loads_split_the_wheelbase() {
    let g = 9.81;
    for (m, f_gv) in [(4.0, 20.0), (2.5, 10.0), (10.0, 70.0)] {
        let loads = AxleLoads::new(f_gv, m * g - f_gv);
        let cog = cog_from_scale(&loads, 0.36, m, g).unwrap();
        assert!((cog.l_v + cog.l_h - 0.36).abs() < 1e-15);
    }
}
