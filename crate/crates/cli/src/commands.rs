use std::fmt::{Display, Write as _};
use std::path::Path;

use vehpred::estimate::{align_to_times, bench_cycle, horizon_predictions};
use vehpred::io::{
    circular_run_from_rows, circular_run_rows, read_csv_file, read_cycle_times, read_sensor_log, write_csv_file,
    write_sensor_log, write_truth_log, CircularRunRow, EstimateRow, MarkerRow, PoseRow, TruthRow,
};
use vehpred::param_id::{
    cog_from_scale, cornering_stiffness, inertia_bifilar, AxleLoads, BifilarMode, CorneringOptions, ForceModel,
    PendulumSetup, SpeedSource,
};
use vehpred::sim::{circular_run_log, marker_log, LapLayout};
use vehpred::{
    closure_metrics, horizon_error, load_config, run_estimate, simulate as run_simulation, synthesize_sensors,
    Config, Error, EstimateOptions, Pose, PoseFix, Result, Scenario, SensorNoise,
};

use crate::{
    BifilarArg, ClosureArgs, CogArgs, CorneringArgs, EstimateArgs, ForceModelArg, HorizonArgs, InertiaArgs,
    ScenarioArg, SimulateArgs, SpeedSourceArg,
};

/// `key=value` lines in insertion order.
#[derive(Default)]
pub struct Summary(String);

impl Summary {
    fn put(&mut self, key: &str, value: impl Display) -> &mut Self {
        let _ = writeln!(self.0, "{key}={value}");
        self
    }
}

impl Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Prefixes I/O failures with the offending path.
fn at_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn read_config(path: &Path) -> Result<Config> {
    let text = at_path(path, std::fs::read_to_string(path).map_err(Error::from))?;
    load_config(&text)
}

fn read_poses(path: &Path) -> Result<Vec<(f64, Pose)>> {
    Ok(at_path(path, read_csv_file::<PoseRow>(path))?
        .iter()
        .map(|r| (r.t_s, r.pose()))
        .collect())
}

pub fn simulate(a: &SimulateArgs) -> Result<Summary> {
    let cfg = read_config(&a.config)?;
    if !(a.stiffness_scale > 0.0 && a.stiffness_scale.is_finite()) {
        return Err(Error::InvalidArgument("--stiffness-scale must be > 0".into()));
    }
    let params = cfg.params.with_stiffness_scale(a.stiffness_scale);
    let scenario = match a.scenario {
        ScenarioArg::Straight => Scenario::straight(a.duration, a.speed),
        ScenarioArg::StepSteer => Scenario::step_steer(a.duration, a.speed, a.step_time, a.delta),
        ScenarioArg::Circle => Scenario::steady_circle(a.duration, a.speed, a.delta),
        ScenarioArg::Lap => {
            let layout = LapLayout {
                laps: a.laps,
                grid_s: cfg.dt,
                ..LapLayout::with_corner_radius(a.speed, a.corner_radius)
            };
            Scenario::lap(&params, a.speed, &layout, a.dt_truth, cfg.delta_max)?
        }
    };
    let truth = run_simulation(&scenario, &params, a.dt_truth)?;
    let noise = if a.noise_free {
        SensorNoise {
            seed: a.seed,
            ..SensorNoise::noiseless()
        }
    } else {
        SensorNoise {
            seed: a.seed,
            ..Default::default()
        }
    };
    let sensors = synthesize_sensors(&truth, &noise, cfg.dt)?;
    write_sensor_log(&a.output, &sensors)?;
    if let Some(path) = &a.truth_output {
        write_truth_log(path, &truth)?;
    }
    let layout = cfg.marker_layout();
    if let Some(path) = &a.markers_output {
        let markers = marker_log(&truth, &layout, a.marker_dt, a.marker_sigma, a.seed)?;
        let rows: Vec<MarkerRow> = markers.iter().map(MarkerRow::from).collect();
        write_csv_file(path, &rows)?;
    }
    if let Some(path) = &a.circular_run_output {
        let run = circular_run_log(&truth, &layout, a.marker_dt, a.marker_sigma, &noise)?;
        write_csv_file(path, &circular_run_rows(&run))?;
    }
    let poses: Vec<Pose> = truth.iter().map(|r| r.pose).collect();
    let path_length: f64 = poses.windows(2).map(|w| w[0].distance_to(&w[1])).sum();
    let max_delta = scenario.delta_profile.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let mut s = Summary::default();
    s.put("scenario", scenario.kind.name())
        .put("duration_s", scenario.duration)
        .put("speed_mps", a.speed)
        .put("max_delta_rad", max_delta)
        .put("seed", a.seed)
        .put("truth_samples", truth.len())
        .put("sensor_samples", sensors.len())
        .put("path_length_m", path_length);
    Ok(s)
}

pub fn estimate(a: &EstimateArgs) -> Result<Summary> {
    let cfg = read_config(&a.config)?;
    let mut s = Summary::default();
    if let Some(input) = &a.input {
        let rows = at_path(input, read_sensor_log(input))?;
        let pose_resets = match &a.pose_reset_log {
            Some(path) => read_poses(path)?
                .into_iter()
                .map(|(t, pose)| PoseFix { t, pose })
                .collect(),
            None => Vec::new(),
        };
        let opts = EstimateOptions {
            model: a.model.into(),
            initial_pose: Pose::origin(),
            pose_resets,
        };
        let run = run_estimate(&rows, &cfg, &opts)?;
        if let Some(path) = &a.output {
            let out: Vec<EstimateRow> = run.records.iter().map(EstimateRow::from).collect();
            write_csv_file(path, &out)?;
        }
        s.put("model", run.model.name()).put("rows", run.records.len());
        match run.closure {
            Some(m) => {
                s.put("path_length_m", m.path_length)
                    .put("position_closure_m", m.position_closure)
                    .put("closure_per_meter", m.closure_per_meter)
                    .put("yaw_closure_rad", m.yaw_closure);
            }
            None => {
                s.put("path_length_m", 0.0);
            }
        }
    }
    if a.bench {
        let mean = bench_cycle(&cfg, a.bench_iterations)?;
        s.put("bench_iterations", a.bench_iterations.max(1))
            .put("bench_mean_cycle_us", format!("{:.3}", mean.as_secs_f64() * 1e6));
    }
    Ok(s)
}

pub fn identify_cog(a: &CogArgs) -> Result<Summary> {
    let loads = AxleLoads {
        f_gv: a.front_load,
        f_gh: a.rear_load,
        f_left: a.left_load,
        f_right: a.right_load,
    };
    let cog = cog_from_scale(&loads, a.wheelbase, a.mass, a.g)?;
    let mut s = Summary::default();
    s.put("l_v_m", cog.l_v).put("l_h_m", cog.l_h);
    if let Some(f) = cog.left_fraction {
        s.put("left_fraction", f);
    }
    Ok(s)
}

pub fn identify_inertia(a: &InertiaArgs) -> Result<Summary> {
    let file = at_path(&a.cycles, std::fs::File::open(&a.cycles).map_err(Error::from))?;
    let cycle_times = read_cycle_times(file)?;
    let mode = match a.mode {
        BifilarArg::Standard => BifilarMode::Standard,
        BifilarArg::SinglePi => BifilarMode::SinglePi,
    };
    let setup = PendulumSetup {
        d: a.cord_separation,
        l: a.cord_length,
        m: a.mass,
        cycle_times,
    };
    let j = inertia_bifilar(&setup, a.g, mode)?;
    let mut s = Summary::default();
    s.put("mode", mode.name())
        .put("cycles", setup.cycle_times.len() - 1)
        .put("period_s", vehpred::param_id::mean_period(&setup.cycle_times)?)
        .put("j_z_kgm2", j);
    Ok(s)
}

pub fn identify_cornering(a: &CorneringArgs) -> Result<Summary> {
    let cfg = read_config(&a.config)?;
    let rows = at_path(&a.input, read_csv_file::<CircularRunRow>(&a.input))?;
    let run = circular_run_from_rows(&rows);
    let opts = CorneringOptions {
        smoothing_window: cfg.smoothing_window,
        steady_window_s: a.steady_window,
        force_model: match a.force_model {
            ForceModelArg::SmallAngle => ForceModel::SmallAngle,
            ForceModelArg::Full => ForceModel::Full,
        },
        speed_source: match a.speed_source {
            SpeedSourceArg::Sensor => SpeedSource::Sensor,
            SpeedSourceArg::Optical => SpeedSource::Optical,
        },
        ..Default::default()
    };
    let p = &cfg.params;
    let est = cornering_stiffness(&run, p.m, p.l_v, p.l_h, &cfg.marker_layout(), &opts)?;
    let mut s = Summary::default();
    s.put("c_v_n_per_rad", est.c_v)
        .put("c_h_n_per_rad", est.c_h)
        .put("f_sv_n", est.f_sv)
        .put("f_sh_n", est.f_sh)
        .put("alpha_v_rad", est.alpha_v)
        .put("alpha_h_rad", est.alpha_h)
        .put("beta_rad", est.means.beta)
        .put("yaw_rate_radps", est.means.psi_dot)
        .put("speed_mps", est.means.v)
        .put("window_start_s", est.window.0)
        .put("window_end_s", est.window.1);
    Ok(s)
}

pub fn metrics_closure(a: &ClosureArgs) -> Result<Summary> {
    let poses: Vec<Pose> = read_poses(&a.input)?.into_iter().map(|(_, p)| p).collect();
    let m = closure_metrics(&poses)?;
    let mut s = Summary::default();
    s.put("poses", poses.len())
        .put("path_length_m", m.path_length)
        .put("position_closure_m", m.position_closure)
        .put("closure_per_meter", m.closure_per_meter)
        .put("yaw_closure_rad", m.yaw_closure);
    Ok(s)
}

pub fn metrics_horizon(a: &HorizonArgs) -> Result<Summary> {
    let cfg = read_config(&a.config)?;
    if a.horizon == 0 {
        return Err(Error::InvalidArgument("--horizon must be >= 1".into()));
    }
    let sensors = at_path(&a.input, read_sensor_log(&a.input))?;
    let truth: Vec<(f64, Pose)> = at_path(&a.truth, read_csv_file::<TruthRow>(&a.truth))?
        .iter()
        .map(|r| (r.t_s, r.pose()))
        .collect();
    let times: Vec<f64> = sensors.iter().map(|r| r.t).collect();
    let truth_poses = align_to_times(&truth, &times)?;
    let pred = horizon_predictions(&sensors, &truth_poses, &cfg, a.model.into(), a.horizon)?;
    if let Some(path) = &a.output {
        let rows: Vec<PoseRow> = pred
            .iter()
            .map(|(t, p)| PoseRow {
                t_s: *t,
                x_m: p.x,
                y_m: p.y,
                psi_rad: p.psi,
            })
            .collect();
        write_csv_file(path, &rows)?;
    }
    let aligned: Vec<(f64, Pose)> = times.into_iter().zip(truth_poses).collect();
    let stats = horizon_error(&pred, &aligned, a.horizon)?;
    let mut s = Summary::default();
    s.put("model", vehpred::EstimatorModel::from(a.model).name())
        .put("horizon_steps", stats.horizon_steps)
        .put("horizon_s", stats.horizon_steps as f64 * cfg.dt)
        .put("samples", stats.samples)
        .put("mean_error_m", stats.mean_error)
        .put("max_error_m", stats.max_error);
    Ok(s)
}
