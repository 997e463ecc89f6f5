//! Ground-truth trajectories from the continuous dynamic model and
//! synthetic sensor, marker and circular-run logs derived from them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::DEFAULT_V_MIN;
use crate::error::{Error, Result};
use crate::models::{dynamic_derivatives, StateDerivative};
use crate::param_id::{CircularRunData, MarkerLayout, MarkerRecord};
use crate::types::{wrap_angle, ControlInput, Pose, VehicleParams, VelocityState};

/// Default proportional gain of the speed-hold loop, 1/s.
pub const DEFAULT_SPEED_GAIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Straight,
    StepSteer,
    SteadyCircle,
    Lap,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Straight => "straight",
            ScenarioKind::StepSteer => "step-steer",
            ScenarioKind::SteadyCircle => "circle",
            ScenarioKind::Lap => "lap",
        }
    }
}

/// A driving manoeuvre: piecewise-constant steering and acceleration
/// schedules plus a proportional speed hold around `v_target`.
///
/// The applied longitudinal acceleration is
/// `a_x(t) = a_x_profile(t) + speed_gain * (v_target - v_x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub duration: f64,
    pub v_target: f64,
    /// `(start time, steering angle)` pairs, sorted by time. Zero before the
    /// first entry.
    pub delta_profile: Vec<(f64, f64)>,
    /// `(start time, acceleration)` pairs, sorted by time.
    pub a_x_profile: Vec<(f64, f64)>,
    pub speed_gain: f64,
}

fn schedule_value(profile: &[(f64, f64)], t: f64) -> f64 {
    // breakpoints within a tiny tolerance of `t` count as reached
    let idx = profile.partition_point(|(start, _)| *start <= t + 1e-9);
    if idx == 0 {
        0.0
    } else {
        profile[idx - 1].1
    }
}

/// Lap geometry expressed in time at the target speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LapLayout {
    /// Duration of each corner including the steering ramps.
    pub corner_s: f64,
    pub long_straight_s: f64,
    pub short_straight_s: f64,
    pub laps: usize,
    /// Time to ramp the steering in and out of a corner; the ramp is a
    /// staircase on `grid_s`.
    pub ramp_s: f64,
    /// Schedule grid. Every steering change falls on a multiple of it, so
    /// logs sampled at this step see the inputs without delay.
    pub grid_s: f64,
}

impl LapLayout {
    /// Rounded rectangle with 4 m and 2 m straights and corners of roughly
    /// 1.5 m radius, for a vehicle at speed `v`.
    pub fn rounded_rectangle(v: f64) -> Self {
        LapLayout::with_corner_radius(v, 1.5)
    }

    /// Same straights as [`LapLayout::rounded_rectangle`] with corners of
    /// roughly `radius` metres.
    pub fn with_corner_radius(v: f64, radius: f64) -> Self {
        LapLayout {
            corner_s: radius * std::f64::consts::FRAC_PI_2 / v,
            long_straight_s: 4.0 / v,
            short_straight_s: 2.0 / v,
            laps: 1,
            ramp_s: 0.25,
            grid_s: crate::config::DEFAULT_DT,
        }
    }

    fn snapped(&self) -> Result<Self> {
        if !(self.grid_s > 0.0 && self.grid_s.is_finite()) {
            return Err(Error::InvalidArgument("lap grid step must be > 0".into()));
        }
        let snap = |s: f64| (s / self.grid_s).round() * self.grid_s;
        let layout = LapLayout {
            corner_s: snap(self.corner_s),
            long_straight_s: 2.0 * snap(self.long_straight_s / 2.0),
            short_straight_s: snap(self.short_straight_s),
            ramp_s: snap(self.ramp_s.max(0.0)),
            ..*self
        };
        if layout.corner_s < 2.0 * layout.ramp_s + layout.grid_s {
            return Err(Error::InvalidArgument("corners must be longer than both steering ramps".into()));
        }
        Ok(layout)
    }

    fn ramp_steps(&self) -> usize {
        (self.ramp_s / self.grid_s).round() as usize
    }

    /// Steering schedule of one corner starting at `t0`.
    fn push_corner(&self, profile: &mut Vec<(f64, f64)>, t0: f64, delta: f64) {
        let n = self.ramp_steps();
        let g = self.grid_s;
        let t_end = t0 + self.corner_s;
        for i in 0..n {
            profile.push((t0 + i as f64 * g, delta * (i + 1) as f64 / (n + 1) as f64));
        }
        profile.push((t0 + n as f64 * g, delta));
        for i in 0..n {
            profile.push((t_end - (n - i) as f64 * g, delta * (n - i) as f64 / (n + 1) as f64));
        }
        profile.push((t_end, 0.0));
    }
}

impl Scenario {
    fn base(kind: ScenarioKind, duration: f64, v_target: f64) -> Self {
        Scenario {
            kind,
            duration,
            v_target,
            delta_profile: Vec::new(),
            a_x_profile: Vec::new(),
            speed_gain: DEFAULT_SPEED_GAIN,
        }
    }

    pub fn straight(duration: f64, v: f64) -> Self {
        Scenario::base(ScenarioKind::Straight, duration, v)
    }

    pub fn step_steer(duration: f64, v: f64, t_step: f64, delta: f64) -> Self {
        Scenario {
            delta_profile: vec![(t_step, delta)],
            ..Scenario::base(ScenarioKind::StepSteer, duration, v)
        }
    }

    pub fn steady_circle(duration: f64, v: f64, delta: f64) -> Self {
        Scenario {
            delta_profile: vec![(0.0, delta)],
            ..Scenario::base(ScenarioKind::SteadyCircle, duration, v)
        }
    }

    /// Counter-clockwise rounded-rectangle lap with a fixed corner steering
    /// angle. Starts and ends halfway along a long straight.
    pub fn lap_with_delta(v: f64, layout: &LapLayout, delta: f64) -> Result<Self> {
        let layout = layout.snapped()?;
        let mut profile = Vec::new();
        let mut t = 0.0;
        for _ in 0..layout.laps.max(1) {
            t += layout.long_straight_s / 2.0;
            for i in 0..4 {
                layout.push_corner(&mut profile, t, delta);
                t += layout.corner_s;
                t += match i {
                    0 | 2 => layout.short_straight_s,
                    1 => layout.long_straight_s,
                    _ => layout.long_straight_s / 2.0,
                };
            }
        }
        Ok(Scenario {
            delta_profile: profile,
            ..Scenario::base(ScenarioKind::Lap, t, v)
        })
    }

    /// Lap whose corner steering angle is tuned so that each half lap turns
    /// the vehicle by exactly π; the true trajectory then closes on itself.
    ///
    /// Segment durations are rounded to `layout.grid_s`, which must be a
    /// multiple of `dt_truth`.
    pub fn lap(params: &VehicleParams, v: f64, layout: &LapLayout, dt_truth: f64, delta_max: f64) -> Result<Self> {
        let layout = layout.snapped()?;
        let ratio = layout.grid_s / dt_truth;
        if (ratio - ratio.round()).abs() > 1e-6 || ratio < 0.5 {
            return Err(Error::GridMismatch(format!(
                "lap grid {} s is not a multiple of the truth step {dt_truth} s",
                layout.grid_s
            )));
        }
        // turn of one half lap: corner, short straight, corner, long straight
        let half_turn = |delta: f64| -> Result<f64> {
            let mut profile = Vec::new();
            layout.push_corner(&mut profile, 0.0, delta);
            layout.push_corner(&mut profile, layout.corner_s + layout.short_straight_s, delta);
            let sc = Scenario {
                delta_profile: profile,
                ..Scenario::base(
                    ScenarioKind::Lap,
                    2.0 * layout.corner_s + layout.short_straight_s + layout.long_straight_s,
                    v,
                )
            };
            Ok(unwrapped_heading(&simulate(&sc, params, dt_truth)?))
        };
        let target = std::f64::consts::PI;
        let (mut lo, mut hi) = (0.0, delta_max);
        if half_turn(hi)? < target {
            return Err(Error::InvalidArgument(format!(
                "corners of {} s cannot turn 90 degrees within the steering limit",
                layout.corner_s
            )));
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if half_turn(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Scenario::lap_with_delta(v, &layout, 0.5 * (lo + hi))
    }

    pub fn delta_at(&self, t: f64) -> f64 {
        schedule_value(&self.delta_profile, t)
    }

    fn input_at(&self, t: f64, v_x: f64) -> ControlInput {
        ControlInput {
            delta: self.delta_at(t),
            a_x: schedule_value(&self.a_x_profile, t) + self.speed_gain * (self.v_target - v_x),
        }
    }
}

fn unwrapped_heading(truth: &[TruthRecord]) -> f64 {
    truth
        .windows(2)
        .map(|w| wrap_angle(w[1].pose.psi - w[0].pose.psi))
        .sum()
}

/// One sample of the true trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub t: f64,
    pub pose: Pose,
    pub vel: VelocityState,
    /// Body-frame lateral acceleration `dv_y/dt + v_x psi_dot`.
    pub a_y: f64,
    /// Input applied at `t`.
    pub input: ControlInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

type State = [f64; 6];

fn derivative(sc: &Scenario, params: &VehicleParams, t: f64, s: &State) -> Result<(State, ControlInput, StateDerivative)> {
    let pose = Pose {
        x: s[0],
        y: s[1],
        psi: s[2],
    };
    let vel = VelocityState::new(s[3], s[4], s[5]);
    let u = sc.input_at(t, s[3]);
    let d = dynamic_derivatives(&pose, &vel, &u, params, DEFAULT_V_MIN)?;
    Ok(([d.dx, d.dy, d.dpsi, d.dv_x, d.dv_y, d.dpsi_dot], u, d))
}

fn axpy(s: &State, h: f64, k: &State) -> State {
    std::array::from_fn(|i| s[i] + h * k[i])
}

/// Integrates the continuous dynamic model with classical RK4 at
/// `dt_truth` (at most 1 ms). The steering schedule is sampled at the start
/// of each step; the speed hold acts continuously.
pub fn simulate(scenario: &Scenario, params: &VehicleParams, dt_truth: f64) -> Result<Vec<TruthRecord>> {
    simulate_with(scenario, params, dt_truth, Integrator::Rk4)
}

pub fn simulate_with(
    scenario: &Scenario,
    params: &VehicleParams,
    dt_truth: f64,
    integrator: Integrator,
) -> Result<Vec<TruthRecord>> {
    if !(dt_truth > 0.0 && dt_truth <= 1e-3) {
        return Err(Error::InvalidArgument("dt_truth must be in (0, 0.001] s".into()));
    }
    if !(scenario.duration > 0.0) {
        return Err(Error::InvalidArgument("scenario duration must be > 0".into()));
    }
    if scenario.delta_profile.windows(2).any(|w| w[1].0 < w[0].0)
        || scenario.a_x_profile.windows(2).any(|w| w[1].0 < w[0].0)
    {
        return Err(Error::InvalidArgument("schedules must be time-sorted".into()));
    }
    params.validate()?;
    let steps = (scenario.duration / dt_truth).round() as usize;
    let mut s: State = [0.0, 0.0, 0.0, scenario.v_target, 0.0, 0.0];
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt_truth;
        let (k1, u, d) = derivative(scenario, params, t, &s)?;
        out.push(TruthRecord {
            t,
            pose: Pose::new(s[0], s[1], s[2]),
            vel: VelocityState::new(s[3], s[4], s[5]),
            a_y: d.dv_y + s[3] * s[5],
            input: u,
        });
        if k == steps {
            break;
        }
        let h = dt_truth;
        // steering held over the step
        let sc_hold = |st: &State| -> Result<State> {
            let pose = Pose {
                x: st[0],
                y: st[1],
                psi: st[2],
            };
            let vel = VelocityState::new(st[3], st[4], st[5]);
            let u_stage = ControlInput {
                delta: u.delta,
                a_x: scenario.input_at(t, st[3]).a_x,
            };
            let d = dynamic_derivatives(&pose, &vel, &u_stage, params, DEFAULT_V_MIN)?;
            Ok([d.dx, d.dy, d.dpsi, d.dv_x, d.dv_y, d.dpsi_dot])
        };
        s = match integrator {
            Integrator::Euler => axpy(&s, h, &k1),
            Integrator::Rk4 => {
                let k2 = sc_hold(&axpy(&s, h / 2.0, &k1))?;
                let k3 = sc_hold(&axpy(&s, h / 2.0, &k2))?;
                let k4 = sc_hold(&axpy(&s, h, &k3))?;
                std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            }
        };
    }
    Ok(out)
}

/// Noise added to the synthetic sensor channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNoise {
    pub sigma_psidot: f64,
    pub sigma_vx: f64,
    pub sigma_ax: f64,
    pub sigma_ay: f64,
    pub bias_psidot: f64,
    pub bias_vx: f64,
    pub bias_ax: f64,
    pub bias_ay: f64,
    pub seed: u64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise {
            sigma_psidot: 0.035,
            sigma_vx: 0.03,
            sigma_ax: 0.05,
            sigma_ay: 0.05,
            bias_psidot: 0.0,
            bias_vx: 0.0,
            bias_ax: 0.0,
            bias_ay: 0.0,
            seed: 0,
        }
    }
}

impl SensorNoise {
    pub fn noiseless() -> Self {
        SensorNoise {
            sigma_psidot: 0.0,
            sigma_vx: 0.0,
            sigma_ax: 0.0,
            sigma_ay: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.sigma_psidot, self.sigma_vx, self.sigma_ax, self.sigma_ay];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("noise sigmas must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// One row of the estimator input log. Missing measurements are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorRecord {
    pub t: f64,
    pub delta: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub v_x_meas: Option<f64>,
    pub psidot_meas: Option<f64>,
}

impl SensorRecord {
    pub fn input(&self) -> ControlInput {
        ControlInput::new(self.delta, self.a_x)
    }

    pub fn measurement(&self) -> Option<crate::types::Measurement> {
        match (self.psidot_meas, self.v_x_meas) {
            (Some(r), Some(v)) => Some(crate::types::Measurement::new(r, v)),
            _ => None,
        }
    }
}

/// Number of truth samples per output sample.
fn decimation(truth: &[TruthRecord], dt_out: f64) -> Result<usize> {
    if truth.len() < 2 {
        return Err(Error::GridMismatch("truth log needs at least two samples".into()));
    }
    let dt_truth = truth[1].t - truth[0].t;
    let ratio = dt_out / dt_truth;
    let r = ratio.round();
    if !(r >= 1.0) || (ratio - r).abs() > 1e-6 {
        return Err(Error::GridMismatch(format!(
            "output step {dt_out} s is not an integer multiple of the truth step {dt_truth} s"
        )));
    }
    Ok(r as usize)
}

struct Gaussian(ChaCha8Rng);

impl Gaussian {
    fn new(seed: u64) -> Self {
        Gaussian(ChaCha8Rng::seed_from_u64(seed))
    }

    fn sample(&mut self, sigma: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.0);
        sigma * z
    }
}

/// Resamples the truth to `dt_sensor` and adds seeded Gaussian noise and
/// bias to every measured channel. Steering is reported exactly.
pub fn synthesize_sensors(truth: &[TruthRecord], noise: &SensorNoise, dt_sensor: f64) -> Result<Vec<SensorRecord>> {
    noise.validate()?;
    let r = decimation(truth, dt_sensor)?;
    let mut rng = Gaussian::new(noise.seed);
    Ok(truth
        .iter()
        .step_by(r)
        .map(|tr| {
            let psidot = tr.vel.psi_dot + noise.bias_psidot + rng.sample(noise.sigma_psidot);
            let v_x = tr.vel.v_x + noise.bias_vx + rng.sample(noise.sigma_vx);
            let a_x = tr.input.a_x + noise.bias_ax + rng.sample(noise.sigma_ax);
            let a_y = tr.a_y + noise.bias_ay + rng.sample(noise.sigma_ay);
            SensorRecord {
                t: tr.t,
                delta: tr.input.delta,
                a_x,
                a_y,
                v_x_meas: Some(v_x),
                psidot_meas: Some(psidot),
            }
        })
        .collect())
}

/// World positions of the front and rear markers at `dt_out`, with
/// isotropic Gaussian noise of `sigma` metres per coordinate.
pub fn marker_log(
    truth: &[TruthRecord],
    layout: &MarkerLayout,
    dt_out: f64,
    sigma: f64,
    seed: u64,
) -> Result<Vec<MarkerRecord>> {
    let r = decimation(truth, dt_out)?;
    let mut rng = Gaussian::new(seed);
    Ok(truth
        .iter()
        .step_by(r)
        .map(|tr| {
            let (s, c) = tr.pose.psi.sin_cos();
            let front = [
                tr.pose.x + layout.front_offset * c + rng.sample(sigma),
                tr.pose.y + layout.front_offset * s + rng.sample(sigma),
            ];
            let rear = [
                tr.pose.x - layout.rear_offset * c + rng.sample(sigma),
                tr.pose.y - layout.rear_offset * s + rng.sample(sigma),
            ];
            MarkerRecord { t: tr.t, front, rear }
        })
        .collect())
}

/// Marker log plus IMU and speed channels, as recorded during a circular
/// run. The speed channel is the full planar speed.
pub fn circular_run_log(
    truth: &[TruthRecord],
    layout: &MarkerLayout,
    dt_out: f64,
    marker_sigma: f64,
    noise: &SensorNoise,
) -> Result<CircularRunData> {
    noise.validate()?;
    let markers = marker_log(truth, layout, dt_out, marker_sigma, noise.seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let r = decimation(truth, dt_out)?;
    let mut rng = Gaussian::new(noise.seed);
    let mut run = CircularRunData {
        markers,
        ..Default::default()
    };
    for tr in truth.iter().step_by(r) {
        run.a_y.push(tr.a_y + noise.bias_ay + rng.sample(noise.sigma_ay));
        run.psi_dot.push(tr.vel.psi_dot + noise.bias_psidot + rng.sample(noise.sigma_psidot));
        run.v.push(tr.vel.speed() + noise.bias_vx + rng.sample(noise.sigma_vx));
        run.delta.push(tr.input.delta);
    }
    Ok(run)
}
