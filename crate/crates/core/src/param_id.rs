//! Experimental identification of the vehicle parameters: centre of
//! gravity from axle loads, yaw inertia from a bifilar pendulum, and
//! cornering stiffness from a tracked steady-state circular run.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Axle, Error, Result};
use crate::types::{wrap_angle, VehicleParams};

/// Scale readings under the axles (and optionally the sides), N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxleLoads {
    pub f_gv: f64,
    pub f_gh: f64,
    pub f_left: Option<f64>,
    pub f_right: Option<f64>,
}

impl AxleLoads {
    pub fn new(f_gv: f64, f_gh: f64) -> Self {
        AxleLoads {
            f_gv,
            f_gh,
            f_left: None,
            f_right: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CogLocation {
    pub l_v: f64,
    pub l_h: f64,
    /// Share of the weight on the left wheels, when side loads were given.
    /// The single-track model has no use for it; it is reported only.
    pub left_fraction: Option<f64>,
}

/// Relative tolerance between the summed axle loads and `m g`.
pub const LOAD_CONSISTENCY_TOL: f64 = 0.02;

/// Longitudinal CoG position from axle loads on a scale.
pub fn cog_from_scale(loads: &AxleLoads, wheelbase: f64, m: f64, g: f64) -> Result<CogLocation> {
    let all = [Some(loads.f_gv), Some(loads.f_gh), loads.f_left, loads.f_right];
    if all.iter().flatten().any(|f| !(*f >= 0.0 && f.is_finite())) {
        return Err(Error::InvalidArgument("axle loads must be finite and >= 0".into()));
    }
    for (name, v) in [("wheelbase", wheelbase), ("m", m), ("g", g)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveParameter(name));
        }
    }
    let weight = m * g;
    let sum = loads.f_gv + loads.f_gh;
    if (sum - weight).abs() / weight > LOAD_CONSISTENCY_TOL {
        return Err(Error::InconsistentLoads { sum, weight });
    }
    let left_fraction = match (loads.f_left, loads.f_right) {
        (Some(l), Some(r)) if l + r > 0.0 => Some(l / (l + r)),
        _ => None,
    };
    Ok(CogLocation {
        l_h: loads.f_gv * wheelbase / weight,
        l_v: loads.f_gh * wheelbase / weight,
        left_fraction,
    })
}

/// Mean oscillation period from successive cycle-start timestamps.
pub fn mean_period(cycle_times: &[f64]) -> Result<f64> {
    if cycle_times.len() < 2 {
        return Err(Error::TooFewCycles(cycle_times.len()));
    }
    for (i, w) in cycle_times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonIncreasingCycles(i + 1));
        }
    }
    let n = cycle_times.len();
    Ok((cycle_times[n - 1] - cycle_times[0]) / (n - 1) as f64)
}

/// Constant in the denominator of the bifilar-pendulum inertia formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BifilarMode {
    /// `J = m g D² T² / (16 π² L)`, the small-angle torsional result.
    #[default]
    Standard,
    /// `J = m g D² T² / (16 π L)`, as printed in some references.
    SinglePi,
}

impl BifilarMode {
    pub fn name(&self) -> &'static str {
        match self {
            BifilarMode::Standard => "standard",
            BifilarMode::SinglePi => "single-pi",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "standard" => Some(BifilarMode::Standard),
            "single-pi" => Some(BifilarMode::SinglePi),
            _ => None,
        }
    }

    fn denominator_factor(&self) -> f64 {
        match self {
            BifilarMode::Standard => 16.0 * PI * PI,
            BifilarMode::SinglePi => 16.0 * PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendulumSetup {
    /// Cord separation, m.
    pub d: f64,
    /// Cord length, m.
    pub l: f64,
    /// Suspended mass, kg.
    pub m: f64,
    /// Start time of each observed cycle, s.
    pub cycle_times: Vec<f64>,
}

/// Yaw moment of inertia from a bifilar pendulum.
pub fn inertia_bifilar(setup: &PendulumSetup, g: f64, mode: BifilarMode) -> Result<f64> {
    for (name, v) in [("d", setup.d), ("l", setup.l), ("m", setup.m), ("g", g)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveParameter(name));
        }
    }
    let t = mean_period(&setup.cycle_times)?;
    Ok(setup.m * g * setup.d * setup.d * t * t / (mode.denominator_factor() * setup.l))
}

/// Period of a bifilar pendulum carrying inertia `j`; inverse of
/// [`inertia_bifilar`].
pub fn bifilar_period(j: f64, m: f64, g: f64, d: f64, l: f64, mode: BifilarMode) -> f64 {
    (j * mode.denominator_factor() * l / (m * g * d * d)).sqrt()
}

/// Tracked marker positions in a fixed world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerRecord {
    pub t: f64,
    pub front: [f64; 2],
    pub rear: [f64; 2],
}

/// Markers on the longitudinal axis, `front_offset` ahead of and
/// `rear_offset` behind the CoG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerLayout {
    pub front_offset: f64,
    pub rear_offset: f64,
}

impl MarkerLayout {
    pub fn new(front_offset: f64, rear_offset: f64) -> Self {
        MarkerLayout {
            front_offset,
            rear_offset,
        }
    }

    /// Markers placed directly over the axles.
    pub fn over_axles(params: &VehicleParams) -> Self {
        MarkerLayout::new(params.l_v, params.l_h)
    }

    pub fn separation(&self) -> f64 {
        self.front_offset + self.rear_offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CogSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Relative tolerance on the tracked marker separation.
pub const MARKER_SEPARATION_TOL: f64 = 0.05;

/// CoG position and heading for every marker record.
pub fn cog_track(markers: &[MarkerRecord], layout: &MarkerLayout) -> Result<Vec<CogSample>> {
    let sep = layout.separation();
    let frac = layout.rear_offset / sep;
    markers
        .iter()
        .enumerate()
        .map(|(i, mk)| {
            if i > 0 && !(mk.t > markers[i - 1].t) {
                return Err(Error::GridMismatch(format!(
                    "marker timestamps not increasing at record {i}"
                )));
            }
            let dx = mk.front[0] - mk.rear[0];
            let dy = mk.front[1] - mk.rear[1];
            let dist = dx.hypot(dy);
            if dist < 1e-6 {
                return Err(Error::DegenerateMarkers(i));
            }
            if (dist - sep).abs() > MARKER_SEPARATION_TOL * sep {
                return Err(Error::MarkerSeparation {
                    index: i,
                    measured: dist,
                    expected: sep,
                });
            }
            Ok(CogSample {
                t: mk.t,
                x: mk.rear[0] + frac * dx,
                y: mk.rear[1] + frac * dy,
                heading: wrap_angle(dy.atan2(dx)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSample {
    pub t: f64,
    /// Drift angle: direction of travel relative to the heading.
    pub beta: f64,
    /// Speed of the smoothed CoG track, m/s.
    pub speed: f64,
}

fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    values
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}

fn unwrap_angles(angles: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for a in angles {
        match out.last() {
            Some(&prev) => out.push(prev + wrap_angle(a - prev)),
            None => out.push(a),
        }
    }
    out
}

/// Drift angle from the tangent of the smoothed CoG track.
///
/// Positions and the (unwrapped) heading are smoothed with a centred moving
/// average of odd width `window`; the tangent is the central difference of
/// the smoothed positions. Samples within `window / 2 + 1` of either end
/// are dropped.
pub fn drift_angle_series(cog: &[CogSample], window: usize) -> Result<Vec<DriftSample>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument("smoothing window must be odd".into()));
    }
    if cog.len() < window + 2 {
        return Err(Error::TooFewSamples {
            needed: window + 2,
            got: cog.len(),
        });
    }
    let half = window / 2;
    let xs: Vec<f64> = cog.iter().map(|c| c.x).collect();
    let ys: Vec<f64> = cog.iter().map(|c| c.y).collect();
    let heading = unwrap_angles(cog.iter().map(|c| c.heading));
    let sx = moving_average(&xs, window);
    let sy = moving_average(&ys, window);
    let sh = moving_average(&heading, window);
    // smoothed index j corresponds to raw index j + half
    Ok((1..sx.len() - 1)
        .map(|j| {
            let dx = sx[j + 1] - sx[j - 1];
            let dy = sy[j + 1] - sy[j - 1];
            let dt = cog[j + half + 1].t - cog[j + half - 1].t;
            DriftSample {
                t: cog[j + half].t,
                beta: wrap_angle(dy.atan2(dx) - sh[j]),
                speed: dx.hypot(dy) / dt,
            }
        })
        .collect())
}

/// A steady-state circular run: tracked markers plus IMU/speed samples on
/// the same timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircularRunData {
    pub markers: Vec<MarkerRecord>,
    pub a_y: Vec<f64>,
    pub psi_dot: Vec<f64>,
    pub v: Vec<f64>,
    pub delta: Vec<f64>,
}

impl CircularRunData {
    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.markers.len();
        if [self.a_y.len(), self.psi_dot.len(), self.v.len(), self.delta.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::GridMismatch(
                "run channels must have one sample per marker record".into(),
            ));
        }
        Ok(())
    }
}

/// How the lateral axle forces are obtained from the lateral acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForceModel {
    /// `F_sv = (l_h / l) m a_y`, `F_sh = (l_v / l) m a_y`.
    #[default]
    SmallAngle,
    /// Front force projected through `cos(δ - α_v)` with `a_x ≈ 0`, where
    /// `δ - α_v = β + ψ̇ l_v / v` is taken from the measurements.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpeedSource {
    /// The logged speed channel.
    #[default]
    Sensor,
    /// Speed of the smoothed optical CoG track.
    Optical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorneringOptions {
    pub smoothing_window: usize,
    /// Length of the sliding steady-state window, s.
    pub steady_window_s: f64,
    /// Maximum yaw-rate coefficient of variation inside a steady window.
    pub max_yaw_rate_cv: f64,
    /// Smallest usable slip angle, rad.
    pub min_slip: f64,
    pub force_model: ForceModel,
    pub speed_source: SpeedSource,
}

impl Default for CorneringOptions {
    fn default() -> Self {
        CorneringOptions {
            smoothing_window: crate::config::DEFAULT_SMOOTHING_WINDOW,
            steady_window_s: 2.0,
            max_yaw_rate_cv: 0.05,
            min_slip: 0.005,
            force_model: ForceModel::default(),
            speed_source: SpeedSource::default(),
        }
    }
}

/// Time-averaged quantities over the steady window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyMeans {
    pub a_y: f64,
    pub psi_dot: f64,
    pub v: f64,
    pub beta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorneringEstimate {
    pub c_v: f64,
    pub c_h: f64,
    pub f_sv: f64,
    pub f_sh: f64,
    pub alpha_v: f64,
    pub alpha_h: f64,
    pub means: SteadyMeans,
    /// First and last timestamp of the steady window.
    pub window: (f64, f64),
}

/// Inverts the linear tyre law from steady-state means.
pub fn stiffness_from_means(
    means: &SteadyMeans,
    m: f64,
    l_v: f64,
    l_h: f64,
    opts: &CorneringOptions,
) -> Result<CorneringEstimate> {
    let l = l_v + l_h;
    let alpha_v = means.delta - means.beta - means.psi_dot * l_v / means.v;
    let alpha_h = -means.beta + means.psi_dot * l_h / means.v;
    if alpha_v.abs() <= opts.min_slip {
        return Err(Error::SlipTooSmall(Axle::Front));
    }
    if alpha_h.abs() <= opts.min_slip {
        return Err(Error::SlipTooSmall(Axle::Rear));
    }
    let front_share = l_h / l * m * means.a_y;
    let f_sv = match opts.force_model {
        ForceModel::SmallAngle => front_share,
        ForceModel::Full => front_share * (means.beta + means.psi_dot * l_v / means.v).cos(),
    };
    let f_sh = l_v / l * m * means.a_y;
    Ok(CorneringEstimate {
        c_v: f_sv / alpha_v,
        c_h: f_sh / alpha_h,
        f_sv,
        f_sh,
        alpha_v,
        alpha_h,
        means: *means,
        window: (f64::NAN, f64::NAN),
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn coefficient_of_variation(values: &[f64]) -> f64 {
    let mu = mean(values);
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64;
    var.sqrt() / mu.abs()
}

/// Longest contiguous index range `[start, end)` covered by sliding windows
/// of `width` samples whose yaw-rate coefficient of variation is below the
/// threshold. Ties go to the later range.
fn steady_span(psi_dot: &[f64], width: usize, max_cv: f64) -> Option<(usize, usize)> {
    if width < 2 || psi_dot.len() < width {
        return None;
    }
    let ok: Vec<bool> = psi_dot
        .windows(width)
        .map(|w| coefficient_of_variation(w) < max_cv)
        .collect();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < ok.len() {
        if !ok[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < ok.len() && ok[i] {
            i += 1;
        }
        let span = (start, i - 1 + width);
        if best.is_none_or(|(s, e)| span.1 - span.0 >= e - s) {
            best = Some(span);
        }
    }
    best
}

/// Front and rear cornering stiffness from a steady-state circular run.
pub fn cornering_stiffness(
    run: &CircularRunData,
    m: f64,
    l_v: f64,
    l_h: f64,
    layout: &MarkerLayout,
    opts: &CorneringOptions,
) -> Result<CorneringEstimate> {
    run.check_shape()?;
    let n = run.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let cog = cog_track(&run.markers, layout)?;
    let drift = drift_angle_series(&cog, opts.smoothing_window)?;

    let sample_dt = (run.markers[n - 1].t - run.markers[0].t) / (n - 1) as f64;
    let width = (opts.steady_window_s / sample_dt).round() as usize;
    let (start, end) =
        steady_span(&run.psi_dot, width, opts.max_yaw_rate_cv).ok_or(Error::NoSteadyWindow)?;
    let (t0, t1) = (run.markers[start].t, run.markers[end - 1].t);

    let in_window: Vec<&DriftSample> = drift.iter().filter(|d| d.t >= t0 && d.t <= t1).collect();
    if in_window.is_empty() {
        return Err(Error::NoSteadyWindow);
    }
    let beta = mean(&in_window.iter().map(|d| d.beta).collect::<Vec<_>>());
    let v = match opts.speed_source {
        SpeedSource::Sensor => mean(&run.v[start..end]),
        SpeedSource::Optical => mean(&in_window.iter().map(|d| d.speed).collect::<Vec<_>>()),
    };
    let means = SteadyMeans {
        a_y: mean(&run.a_y[start..end]),
        psi_dot: mean(&run.psi_dot[start..end]),
        v,
        beta,
        delta: mean(&run.delta[start..end]),
    };
    let mut est = stiffness_from_means(&means, m, l_v, l_h, opts)?;
    est.window = (t0, t1);
    Ok(est)
}
