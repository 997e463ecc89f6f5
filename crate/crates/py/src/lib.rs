//! Python module `vehpred`.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vehpred_core as core;
use vehpred_core::estimate::{EstimateOptions, EstimatorModel};
use vehpred_core::models::Discretization;
use vehpred_core::param_id::BifilarMode;
use vehpred_core::sim::LapLayout;

fn to_py(e: core::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(from_py_object, module = "vehpred")]
#[derive(Clone, Copy)]
struct VehicleParams(core::VehicleParams);

#[pymethods]
impl VehicleParams {
    #[new]
    fn new(m: f64, l_v: f64, l_h: f64, j_z: f64, c_v: f64, c_h: f64) -> PyResult<Self> {
        core::VehicleParams::new(m, l_v, l_h, j_z, c_v, c_h).py_err().map(VehicleParams)
    }

    #[getter]
    fn m(&self) -> f64 {
        self.0.m
    }
    #[getter]
    fn l_v(&self) -> f64 {
        self.0.l_v
    }
    #[getter]
    fn l_h(&self) -> f64 {
        self.0.l_h
    }
    #[getter]
    fn j_z(&self) -> f64 {
        self.0.j_z
    }
    #[getter]
    fn c_v(&self) -> f64 {
        self.0.c_v
    }
    #[getter]
    fn c_h(&self) -> f64 {
        self.0.c_h
    }

    fn wheelbase(&self) -> f64 {
        self.0.wheelbase()
    }

    fn with_stiffness_scale(&self, factor: f64) -> Self {
        VehicleParams(self.0.with_stiffness_scale(factor))
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "VehicleParams(m={}, l_v={}, l_h={}, j_z={}, c_v={}, c_h={})",
            p.m, p.l_v, p.l_h, p.j_z, p.c_v, p.c_h
        )
    }
}

#[pyclass(from_py_object, module = "vehpred")]
#[derive(Clone, Copy)]
struct Pose(core::Pose);

#[pymethods]
impl Pose {
    #[new]
    #[pyo3(signature = (x=0.0, y=0.0, psi=0.0))]
    fn new(x: f64, y: f64, psi: f64) -> Self {
        Pose(core::Pose::new(x, y, psi))
    }
    #[getter]
    fn x(&self) -> f64 {
        self.0.x
    }
    #[getter]
    fn y(&self) -> f64 {
        self.0.y
    }
    #[getter]
    fn psi(&self) -> f64 {
        self.0.psi
    }

    fn distance_to(&self, other: &Pose) -> f64 {
        self.0.distance_to(&other.0)
    }

    fn __repr__(&self) -> String {
        format!("Pose(x={}, y={}, psi={})", self.0.x, self.0.y, self.0.psi)
    }
}

#[pyclass(from_py_object, module = "vehpred")]
#[derive(Clone, Copy)]
struct VelocityState(core::VelocityState);

#[pymethods]
impl VelocityState {
    #[new]
    #[pyo3(signature = (v_x, v_y=0.0, psi_dot=0.0))]
    fn new(v_x: f64, v_y: f64, psi_dot: f64) -> Self {
        VelocityState(core::VelocityState::new(v_x, v_y, psi_dot))
    }
    #[getter]
    fn v_x(&self) -> f64 {
        self.0.v_x
    }
    #[getter]
    fn v_y(&self) -> f64 {
        self.0.v_y
    }
    #[getter]
    fn psi_dot(&self) -> f64 {
        self.0.psi_dot
    }

    fn __repr__(&self) -> String {
        format!(
            "VelocityState(v_x={}, v_y={}, psi_dot={})",
            self.0.v_x, self.0.v_y, self.0.psi_dot
        )
    }
}

#[pyclass(from_py_object, module = "vehpred")]
#[derive(Clone)]
struct Config(core::Config);

#[pymethods]
impl Config {
    #[new]
    fn new(params: VehicleParams) -> Self {
        Config(core::Config::new(params.0))
    }

    /// Parses a TOML document.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        core::load_config(text).py_err().map(Config)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        Config::from_toml(&text)
    }

    fn render(&self) -> String {
        self.0.render()
    }

    #[getter]
    fn params(&self) -> VehicleParams {
        VehicleParams(self.0.params)
    }
    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt
    }
    #[getter]
    fn v_min(&self) -> f64 {
        self.0.v_min
    }
    #[getter]
    fn delta_max(&self) -> f64 {
        self.0.delta_max
    }
    #[getter]
    fn q(&self) -> Vec<Vec<f64>> {
        rows(&self.0.noise.q, 3)
    }
    #[getter]
    fn r(&self) -> Vec<Vec<f64>> {
        rows(&self.0.noise.r, 2)
    }
    #[getter]
    fn p0(&self) -> Vec<Vec<f64>> {
        rows(&self.0.noise.p0, 3)
    }
}

fn rows(m: &impl std::ops::Index<(usize, usize), Output = f64>, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect()
}

/// Extended Kalman filter over `(v_x, v_y, psi_dot)` with the pose
/// integrated alongside.
#[pyclass(module = "vehpred")]
struct Filter {
    cfg: core::Config,
    est: core::FilterEstimate,
}

#[pymethods]
impl Filter {
    #[new]
    #[pyo3(signature = (config, vel, pose=None, t=0.0))]
    fn new(config: &Config, vel: VelocityState, pose: Option<Pose>, t: f64) -> Self {
        let pose = pose.map_or(core::Pose::origin(), |p| p.0);
        Filter {
            est: core::FilterEstimate::initial(vel.0, pose, t, &config.0),
            cfg: config.0.clone(),
        }
    }

    /// Time update with steering angle `delta` (rad) and acceleration
    /// `a_x` (m/s^2).
    fn predict(&mut self, delta: f64, a_x: f64) -> PyResult<()> {
        self.est = self.est.predict(&core::ControlInput::new(delta, a_x), &self.cfg).py_err()?;
        Ok(())
    }

    /// Measurement update with yaw rate (rad/s) and longitudinal speed (m/s).
    fn correct(&mut self, psi_dot: f64, v_x: f64) -> PyResult<()> {
        self.est = self.est.correct(&core::Measurement::new(psi_dot, v_x), &self.cfg).py_err()?;
        Ok(())
    }

    /// Predict, then correct when both measurements are given.
    #[pyo3(signature = (delta, a_x, psi_dot=None, v_x=None))]
    fn step(&mut self, delta: f64, a_x: f64, psi_dot: Option<f64>, v_x: Option<f64>) -> PyResult<()> {
        let z = psi_dot.zip(v_x).map(|(r, v)| core::Measurement::new(r, v));
        self.est = self
            .est
            .step(&core::ControlInput::new(delta, a_x), z.as_ref(), &self.cfg)
            .py_err()?;
        Ok(())
    }

    fn reset_pose(&mut self, pose: Pose) {
        self.est = self.est.reset_pose(pose.0);
    }

    #[getter]
    fn vel(&self) -> VelocityState {
        VelocityState(self.est.vel)
    }
    #[getter]
    fn pose(&self) -> Pose {
        Pose(self.est.pose)
    }
    #[getter]
    fn t(&self) -> f64 {
        self.est.t
    }
    #[getter]
    fn covariance(&self) -> Vec<Vec<f64>> {
        rows(&self.est.p, 3)
    }
}

fn discretization(name: &str) -> PyResult<Discretization> {
    Discretization::from_name(name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown discretization `{name}`")))
}

#[pyfunction]
fn kinematic_step(pose: Pose, v_x: f64, delta: f64, params: VehicleParams, dt: f64) -> Pose {
    Pose(core::models::kinematic_step(&pose.0, v_x, delta, &params.0, dt))
}

/// Continuous-time derivatives `(dx, dy, dpsi, dv_x, dv_y, dpsi_dot)`.
#[pyfunction]
#[pyo3(signature = (pose, vel, delta, a_x, params, v_min=0.1))]
fn dynamic_derivatives(
    pose: Pose,
    vel: VelocityState,
    delta: f64,
    a_x: f64,
    params: VehicleParams,
    v_min: f64,
) -> PyResult<(f64, f64, f64, f64, f64, f64)> {
    let d = core::models::dynamic_derivatives(&pose.0, &vel.0, &core::ControlInput::new(delta, a_x), &params.0, v_min)
        .py_err()?;
    Ok((d.dx, d.dy, d.dpsi, d.dv_x, d.dv_y, d.dpsi_dot))
}

fn discrete_model(params: VehicleParams, dt: f64, scheme: &str) -> PyResult<core::DiscreteModel> {
    Ok(core::DiscreteModel {
        discretization: discretization(scheme)?,
        ..core::DiscreteModel::new(params.0, dt)
    })
}

#[pyfunction]
#[pyo3(signature = (vel, delta, a_x, params, dt, discretization="semi-implicit"))]
fn discrete_step(
    vel: VelocityState,
    delta: f64,
    a_x: f64,
    params: VehicleParams,
    dt: f64,
    discretization: &str,
) -> PyResult<VelocityState> {
    let model = discrete_model(params, dt, discretization)?;
    model
        .step(&vel.0, &core::ControlInput::new(delta, a_x))
        .py_err()
        .map(VelocityState)
}

#[pyfunction]
#[pyo3(signature = (vel, delta, a_x, params, dt, discretization="semi-implicit"))]
fn discrete_jacobian(
    vel: VelocityState,
    delta: f64,
    a_x: f64,
    params: VehicleParams,
    dt: f64,
    discretization: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let model = discrete_model(params, dt, discretization)?;
    let j = model.jacobian(&vel.0, &core::ControlInput::new(delta, a_x)).py_err()?;
    Ok(rows(&j, 3))
}

/// Returns `(l_v, l_h)` from the loads under the front and rear axle.
#[pyfunction]
#[pyo3(signature = (f_gv, f_gh, wheelbase, m, g=9.81))]
fn cog_from_scale(f_gv: f64, f_gh: f64, wheelbase: f64, m: f64, g: f64) -> PyResult<(f64, f64)> {
    let cog = core::param_id::cog_from_scale(&core::param_id::AxleLoads::new(f_gv, f_gh), wheelbase, m, g).py_err()?;
    Ok((cog.l_v, cog.l_h))
}

#[pyfunction]
#[pyo3(signature = (cycle_times, m, d, l, g=9.81, mode="standard"))]
fn inertia_bifilar(cycle_times: Vec<f64>, m: f64, d: f64, l: f64, g: f64, mode: &str) -> PyResult<f64> {
    let mode = BifilarMode::from_name(mode).ok_or_else(|| PyValueError::new_err(format!("unknown mode `{mode}`")))?;
    let setup = core::param_id::PendulumSetup { d, l, m, cycle_times };
    core::param_id::inertia_bifilar(&setup, g, mode).py_err()
}

#[pyfunction]
#[pyo3(signature = (j, m, d, l, g=9.81, mode="standard"))]
fn bifilar_period(j: f64, m: f64, d: f64, l: f64, g: f64, mode: &str) -> PyResult<f64> {
    let mode = BifilarMode::from_name(mode).ok_or_else(|| PyValueError::new_err(format!("unknown mode `{mode}`")))?;
    Ok(core::param_id::bifilar_period(j, m, g, d, l, mode))
}

/// Cornering stiffness from a circular-run CSV log.
#[pyfunction]
fn cornering_stiffness<'py>(py: Python<'py>, path: std::path::PathBuf, config: &Config) -> PyResult<Bound<'py, PyDict>> {
    let rows = core::io::read_csv_file::<core::io::CircularRunRow>(&path).py_err()?;
    let run = core::io::circular_run_from_rows(&rows);
    let cfg = &config.0;
    let opts = core::param_id::CorneringOptions {
        smoothing_window: cfg.smoothing_window,
        ..Default::default()
    };
    let p = &cfg.params;
    let est = core::param_id::cornering_stiffness(&run, p.m, p.l_v, p.l_h, &cfg.marker_layout(), &opts).py_err()?;
    let d = PyDict::new(py);
    d.set_item("c_v", est.c_v)?;
    d.set_item("c_h", est.c_h)?;
    d.set_item("alpha_v", est.alpha_v)?;
    d.set_item("alpha_h", est.alpha_h)?;
    d.set_item("beta", est.means.beta)?;
    d.set_item("window", est.window)?;
    Ok(d)
}

fn closure_dict<'py>(py: Python<'py>, m: &core::ClosureMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("path_length", m.path_length)?;
    d.set_item("position_closure", m.position_closure)?;
    d.set_item("closure_per_meter", m.closure_per_meter)?;
    d.set_item("yaw_closure", m.yaw_closure)?;
    Ok(d)
}

#[pyfunction]
fn closure_metrics<'py>(py: Python<'py>, poses: Vec<Pose>) -> PyResult<Bound<'py, PyDict>> {
    let poses: Vec<core::Pose> = poses.into_iter().map(|p| p.0).collect();
    closure_dict(py, &core::closure_metrics(&poses).py_err()?)
}

/// Mean and max position error of `est` against `truth`, both lists of
/// `(t, x, y, psi)`, from index `n` on.
#[pyfunction]
fn horizon_error(
    est: Vec<(f64, f64, f64, f64)>,
    truth: Vec<(f64, f64, f64, f64)>,
    n: usize,
) -> PyResult<(f64, f64)> {
    let conv = |v: Vec<(f64, f64, f64, f64)>| -> Vec<(f64, core::Pose)> {
        v.into_iter().map(|(t, x, y, psi)| (t, core::Pose::new(x, y, psi))).collect()
    };
    let s = core::horizon_error(&conv(est), &conv(truth), n).py_err()?;
    Ok((s.mean_error, s.max_error))
}

type SensorTuple = (f64, f64, f64, f64, Option<f64>, Option<f64>);

/// Simulates a scenario and synthesises sensor data.
///
/// Returns a dict with `truth` as `(t, x, y, psi, v_x, v_y, psi_dot)` tuples
/// and `sensors` as `(t, delta, a_x, a_y, v_x_meas, psidot_meas)` tuples on
/// the filter step.
#[pyfunction]
#[pyo3(signature = (config, scenario="lap", speed=1.0, duration=10.0, delta=0.2, seed=0, noise_free=false, dt_truth=5e-4))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    config: &Config,
    scenario: &str,
    speed: f64,
    duration: f64,
    delta: f64,
    seed: u64,
    noise_free: bool,
    dt_truth: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &config.0;
    let sc = match scenario {
        "straight" => core::Scenario::straight(duration, speed),
        "step-steer" => core::Scenario::step_steer(duration, speed, 1.0, delta),
        "circle" => core::Scenario::steady_circle(duration, speed, delta),
        "lap" => {
            let layout = LapLayout {
                grid_s: cfg.dt,
                ..LapLayout::rounded_rectangle(speed)
            };
            core::Scenario::lap(&cfg.params, speed, &layout, dt_truth, cfg.delta_max).py_err()?
        }
        other => return Err(PyValueError::new_err(format!("unknown scenario `{other}`"))),
    };
    let truth = core::simulate(&sc, &cfg.params, dt_truth).py_err()?;
    let base = if noise_free {
        core::SensorNoise::noiseless()
    } else {
        core::SensorNoise::default()
    };
    let sensors = core::synthesize_sensors(&truth, &core::SensorNoise { seed, ..base }, cfg.dt).py_err()?;
    let d = PyDict::new(py);
    let truth: Vec<(f64, f64, f64, f64, f64, f64, f64)> = truth
        .iter()
        .map(|r| (r.t, r.pose.x, r.pose.y, r.pose.psi, r.vel.v_x, r.vel.v_y, r.vel.psi_dot))
        .collect();
    let sensors: Vec<SensorTuple> = sensors
        .iter()
        .map(|r| (r.t, r.delta, r.a_x, r.a_y, r.v_x_meas, r.psidot_meas))
        .collect();
    d.set_item("truth", truth)?;
    d.set_item("sensors", sensors)?;
    Ok(d)
}

/// Runs an estimator over sensor tuples as returned by [`simulate`].
///
/// Returns a dict with `poses` (`(t, x, y, psi)` tuples), `velocities`
/// and, when the path is not degenerate, `closure`.
#[pyfunction]
#[pyo3(signature = (sensors, config, model="dynamic-ekf"))]
fn run_estimate<'py>(
    py: Python<'py>,
    sensors: Vec<SensorTuple>,
    config: &Config,
    model: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let model =
        EstimatorModel::from_name(model).ok_or_else(|| PyValueError::new_err(format!("unknown model `{model}`")))?;
    let rows: Vec<core::SensorRecord> = sensors
        .into_iter()
        .map(|(t, delta, a_x, a_y, v_x_meas, psidot_meas)| core::SensorRecord {
            t,
            delta,
            a_x,
            a_y,
            v_x_meas,
            psidot_meas,
        })
        .collect();
    let opts = EstimateOptions {
        model,
        ..Default::default()
    };
    let run = core::run_estimate(&rows, &config.0, &opts).py_err()?;
    let d = PyDict::new(py);
    let poses: Vec<(f64, f64, f64, f64)> = run
        .records
        .iter()
        .map(|r| (r.t, r.pose.x, r.pose.y, r.pose.psi))
        .collect();
    let vels: Vec<(f64, f64, f64)> = run.records.iter().map(|r| (r.vel.v_x, r.vel.v_y, r.vel.psi_dot)).collect();
    d.set_item("poses", poses)?;
    d.set_item("velocities", vels)?;
    if let Some(m) = &run.closure {
        d.set_item("closure", closure_dict(py, m)?)?;
    }
    Ok(d)
}

/// Mean wall time of one predict + correct cycle, microseconds.
#[pyfunction]
#[pyo3(signature = (config, iterations=100_000))]
fn bench_cycle(config: &Config, iterations: usize) -> PyResult<f64> {
    let d = core::estimate::bench_cycle(&config.0, iterations).py_err()?;
    Ok(d.as_secs_f64() * 1e6)
}

#[pymodule]
fn vehpred(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<VehicleParams>()?;
    m.add_class::<Pose>()?;
    m.add_class::<VelocityState>()?;
    m.add_class::<Config>()?;
    m.add_class::<Filter>()?;
    m.add_function(wrap_pyfunction!(kinematic_step, m)?)?;
    m.add_function(wrap_pyfunction!(dynamic_derivatives, m)?)?;
    m.add_function(wrap_pyfunction!(discrete_step, m)?)?;
    m.add_function(wrap_pyfunction!(discrete_jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(cog_from_scale, m)?)?;
    m.add_function(wrap_pyfunction!(inertia_bifilar, m)?)?;
    m.add_function(wrap_pyfunction!(bifilar_period, m)?)?;
    m.add_function(wrap_pyfunction!(cornering_stiffness, m)?)?;
    m.add_function(wrap_pyfunction!(closure_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(horizon_error, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(bench_cycle, m)?)?;
    Ok(())
}
