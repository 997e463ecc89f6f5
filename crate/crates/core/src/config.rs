//! Filter and model configuration, loaded from a TOML document.
//!
//! Recognised keys (all SI, radians):
//!
//! ```toml
//! dt = 0.005               # filter step, s
//! v_min = 0.1              # dynamic-model speed threshold, m/s
//! delta_max = 0.6          # steering limit, rad
//! smoothing_window = 5     # samples, odd and >= 3
//! g = 9.81                 # m/s^2
//! eps_den = 1e-9           # singular-denominator guard of the discrete model
//! discretization = "semi-implicit"   # or "reversed"
//! bifilar = "standard"               # or "single-pi"
//!
//! [params]                 # required
//! m = 4.0
//! l_v = 0.16
//! l_h = 0.20
//! j_z = 0.05
//! c_v = 50.0
//! c_h = 50.0
//!
//! [noise]
//! q_diag = [0.05, 0.01, 0.01]   # or q = [[..], [..], [..]]
//! r_diag = [0.125, 0.10]        # or r = [[..], [..]]
//! p0_diag = [0.05, 0.01, 0.01]  # or p0 = [[..], [..], [..]]
//! sigma_ax = 0.05               # optional, enables the v_x variance guideline check
//!
//! [markers]                # optional, defaults to markers over the axles
//! front_offset = 0.16      # marker distance ahead of the CoG, m
//! rear_offset = 0.20       # marker distance behind the CoG, m
//! ```

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Discretization;
use crate::param_id::{BifilarMode, MarkerLayout};
use crate::types::VehicleParams;

pub const DEFAULT_DT: f64 = 0.005;
pub const DEFAULT_V_MIN: f64 = 0.1;
pub const DEFAULT_DELTA_MAX: f64 = 0.6;
pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;
pub const DEFAULT_G: f64 = 9.81;
pub const DEFAULT_EPS_DEN: f64 = 1e-9;
pub const DEFAULT_Q_DIAG: [f64; 3] = [0.05, 0.01, 0.01];
pub const DEFAULT_R_DIAG: [f64; 2] = [0.125, 0.10];
pub const DEFAULT_P0_DIAG: [f64; 3] = [0.05, 0.01, 0.01];

/// Process, measurement and initial covariances.
///
/// `q` and `p0` are ordered `(v_x, v_y, psi_dot)`, `r` is ordered
/// `(psi_dot, v_x)` like the measurement vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub q: Matrix3<f64>,
    pub r: Matrix2<f64>,
    pub p0: Matrix3<f64>,
    /// Accelerometer standard deviation, used only for the guideline check.
    pub sigma_ax: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            q: Matrix3::from_diagonal(&DEFAULT_Q_DIAG.into()),
            r: Matrix2::from_diagonal(&DEFAULT_R_DIAG.into()),
            p0: Matrix3::from_diagonal(&DEFAULT_P0_DIAG.into()),
            sigma_ax: None,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        check_covariance("noise.q", self.q.as_slice(), 3, false)?;
        check_covariance("noise.r", self.r.as_slice(), 2, true)?;
        check_covariance("noise.p0", self.p0.as_slice(), 3, false)?;
        if let Some(s) = self.sigma_ax {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(invalid("noise.sigma_ax", "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

fn invalid(location: &str, message: &str) -> Error {
    Error::Parse {
        location: location.to_string(),
        message: message.to_string(),
    }
}

fn check_covariance(name: &str, data: &[f64], n: usize, definite: bool) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(invalid(name, "entries must be finite"));
    }
    let scale = data.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (data[i * n + j] - data[j * n + i]).abs() > 1e-12 * scale {
                return Err(invalid(name, "matrix must be symmetric"));
            }
        }
    }
    let min_eig = if n == 2 {
        let m = Matrix2::from_column_slice(data);
        m.symmetric_eigenvalues().min()
    } else {
        let m = Matrix3::from_column_slice(data);
        m.symmetric_eigenvalues().min()
    };
    if definite && min_eig <= 0.0 {
        return Err(invalid(name, "matrix must be positive definite"));
    }
    if !definite && min_eig < -1e-12 * scale {
        return Err(invalid(name, "matrix must be positive semidefinite"));
    }
    Ok(())
}

/// Marker placement relative to the CoG, before it is resolved against the
/// vehicle geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerOffsets {
    pub front_offset: f64,
    pub rear_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: VehicleParams,
    pub noise: NoiseConfig,
    pub dt: f64,
    pub v_min: f64,
    pub delta_max: f64,
    pub smoothing_window: usize,
    pub g: f64,
    pub eps_den: f64,
    pub discretization: Discretization,
    pub bifilar: BifilarMode,
    pub markers: Option<MarkerOffsets>,
}

impl Config {
    /// Configuration with every optional key at its default.
    pub fn new(params: VehicleParams) -> Self {
        Config {
            params,
            noise: NoiseConfig::default(),
            dt: DEFAULT_DT,
            v_min: DEFAULT_V_MIN,
            delta_max: DEFAULT_DELTA_MAX,
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            g: DEFAULT_G,
            eps_den: DEFAULT_EPS_DEN,
            discretization: Discretization::default(),
            bifilar: BifilarMode::default(),
            markers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let positive = [
            ("dt", self.dt),
            ("v_min", self.v_min),
            ("delta_max", self.delta_max),
            ("g", self.g),
            ("eps_den", self.eps_den),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(name, "must be finite and > 0"));
            }
        }
        if self.smoothing_window < 3 || self.smoothing_window.is_multiple_of(2) {
            return Err(invalid("smoothing_window", "must be odd and >= 3"));
        }
        if let Some(mk) = self.markers {
            if !(mk.front_offset.is_finite()
                && mk.rear_offset.is_finite()
                && mk.front_offset + mk.rear_offset > 0.0)
            {
                return Err(invalid(
                    "markers",
                    "offsets must be finite with a positive separation",
                ));
            }
        }
        self.noise.validate()
    }

    /// Marker layout, defaulting to markers directly over the axles.
    pub fn marker_layout(&self) -> MarkerLayout {
        match self.markers {
            Some(m) => MarkerLayout::new(m.front_offset, m.rear_offset),
            None => MarkerLayout::over_axles(&self.params),
        }
    }

    /// Modelling guidelines that are violated by this configuration. They
    /// are advisory and never make a configuration invalid.
    pub fn guideline_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(sigma_ax) = self.noise.sigma_ax {
            let var_vx = self.noise.q[(0, 0)];
            let bound = self.dt * sigma_ax * sigma_ax;
            if var_vx <= bound {
                out.push(format!(
                    "process variance of v_x ({var_vx}) should exceed dt * sigma_ax^2 ({bound})"
                ));
            }
        }
        out
    }

    /// Serialises the configuration as a TOML document accepted by
    /// [`load_config`].
    pub fn render(&self) -> String {
        let raw = RawConfig {
            params: Some(self.params),
            dt: Some(self.dt),
            v_min: Some(self.v_min),
            delta_max: Some(self.delta_max),
            smoothing_window: Some(self.smoothing_window as i64),
            g: Some(self.g),
            eps_den: Some(self.eps_den),
            discretization: Some(self.discretization.name().to_string()),
            bifilar: Some(self.bifilar.name().to_string()),
            noise: Some(RawNoise::from_noise(&self.noise)),
            markers: self.markers,
        };
        toml::to_string(&raw).expect("config is always serialisable")
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    #[serde(skip_serializing_if = "Option::is_none")]
    q_diag: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<[[f64; 3]; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_diag: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p0_diag: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p0: Option<[[f64; 3]; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_ax: Option<f64>,
}

fn is_diagonal<const N: usize>(rows: &[[f64; N]; N]) -> bool {
    (0..N).all(|i| (0..N).all(|j| i == j || rows[i][j] == 0.0))
}

fn rows3(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn rows2(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

impl RawNoise {
    fn from_noise(n: &NoiseConfig) -> Self {
        let mut raw = RawNoise {
            sigma_ax: n.sigma_ax,
            ..Default::default()
        };
        let q = rows3(&n.q);
        if is_diagonal(&q) {
            raw.q_diag = Some(std::array::from_fn(|i| q[i][i]));
        } else {
            raw.q = Some(q);
        }
        let r = rows2(&n.r);
        if is_diagonal(&r) {
            raw.r_diag = Some(std::array::from_fn(|i| r[i][i]));
        } else {
            raw.r = Some(r);
        }
        let p0 = rows3(&n.p0);
        if is_diagonal(&p0) {
            raw.p0_diag = Some(std::array::from_fn(|i| p0[i][i]));
        } else {
            raw.p0 = Some(p0);
        }
        raw
    }

    fn into_noise(self) -> Result<NoiseConfig> {
        let d = NoiseConfig::default();
        let q = match (self.q_diag, self.q) {
            (Some(_), Some(_)) => return Err(invalid("noise", "give either q_diag or q")),
            (Some(diag), None) => Matrix3::from_diagonal(&diag.into()),
            (None, Some(rows)) => Matrix3::from_fn(|i, j| rows[i][j]),
            (None, None) => d.q,
        };
        let r = match (self.r_diag, self.r) {
            (Some(_), Some(_)) => return Err(invalid("noise", "give either r_diag or r")),
            (Some(diag), None) => Matrix2::from_diagonal(&diag.into()),
            (None, Some(rows)) => Matrix2::from_fn(|i, j| rows[i][j]),
            (None, None) => d.r,
        };
        let p0 = match (self.p0_diag, self.p0) {
            (Some(_), Some(_)) => return Err(invalid("noise", "give either p0_diag or p0")),
            (Some(diag), None) => Matrix3::from_diagonal(&diag.into()),
            (None, Some(rows)) => Matrix3::from_fn(|i, j| rows[i][j]),
            (None, None) => d.p0,
        };
        Ok(NoiseConfig {
            q,
            r,
            p0,
            sigma_ax: self.sigma_ax,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    smoothing_window: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_den: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    discretization: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bifilar: Option<String>,
    params: Option<VehicleParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<RawNoise>,
    #[serde(skip_serializing_if = "Option::is_none")]
    markers: Option<MarkerOffsets>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Parses and validates a TOML configuration document.
///
/// Absent optional keys take their defaults. Violated modelling guidelines
/// are logged as warnings.
pub fn load_config(text: &str) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("line {line}, column {col}")
            }
            None => "document".to_string(),
        };
        Error::Parse {
            location,
            message: e.message().trim().to_string(),
        }
    })?;

    let params = raw
        .params
        .ok_or_else(|| invalid("params", "missing required table"))?
        .validate()?;
    let mut cfg = Config::new(params);
    if let Some(v) = raw.dt {
        cfg.dt = v;
    }
    if let Some(v) = raw.v_min {
        cfg.v_min = v;
    }
    if let Some(v) = raw.delta_max {
        cfg.delta_max = v;
    }
    if let Some(v) = raw.smoothing_window {
        cfg.smoothing_window = usize::try_from(v)
            .map_err(|_| invalid("smoothing_window", "must be odd and >= 3"))?;
    }
    if let Some(v) = raw.g {
        cfg.g = v;
    }
    if let Some(v) = raw.eps_den {
        cfg.eps_den = v;
    }
    if let Some(name) = raw.discretization {
        cfg.discretization = Discretization::from_name(&name)
            .ok_or_else(|| invalid("discretization", "expected \"semi-implicit\" or \"reversed\""))?;
    }
    if let Some(name) = raw.bifilar {
        cfg.bifilar = BifilarMode::from_name(&name)
            .ok_or_else(|| invalid("bifilar", "expected \"standard\" or \"single-pi\""))?;
    }
    if let Some(noise) = raw.noise {
        cfg.noise = noise.into_noise()?;
    }
    cfg.markers = raw.markers;
    cfg.validate()?;
    for w in cfg.guideline_warnings() {
        log::warn!("{w}");
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PARAMS_ONLY: &str = r#"
[params]
m = 4.0
l_v = 0.18
l_h = 0.18
j_z = 0.05
c_v = 50.0
c_h = 50.0
"#;

    #[test]
    fn params_only_takes_defaults() {
        let cfg = load_config(PARAMS_ONLY).unwrap();
        assert_eq!(cfg.dt, 0.005);
        assert_eq!(cfg.v_min, 0.1);
        assert_eq!(cfg.delta_max, 0.6);
        assert_eq!(cfg.smoothing_window, 5);
        assert_eq!(cfg.g, 9.81);
        assert_eq!(cfg.noise, NoiseConfig::default());
        assert_eq!(cfg.params.m, 4.0);
    }

    #[test]
    fn negative_dt_is_a_parse_error() {
        let text = format!("dt = -1.0\n{PARAMS_ONLY}");
        match load_config(&text) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "dt"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_covariances_parse() {
        let text = format!("{PARAMS_ONLY}\n[noise]\nq_diag = [0.05, 0.01, 0.01]\nr_diag = [0.125, 0.10]\n");
        let cfg = load_config(&text).unwrap();
        assert_eq!(cfg.noise.q, Matrix3::from_diagonal(&[0.05, 0.01, 0.01].into()));
        assert_eq!(cfg.noise.r, Matrix2::from_diagonal(&[0.125, 0.10].into()));
    }

    #[test]
    fn bad_params_report_field() {
        let text = PARAMS_ONLY.replace("m = 4.0", "m = 0.0");
        assert!(matches!(load_config(&text), Err(Error::NonPositiveParameter("m"))));
    }

    #[test]
    fn syntax_error_has_line() {
        let text = format!("{PARAMS_ONLY}\ndt = = 3\n");
        match load_config(&text) {
            Err(Error::Parse { location, .. }) => assert!(location.starts_with("line 10"), "{location}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("dtt = 0.01\n{PARAMS_ONLY}");
        assert!(matches!(load_config(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn even_window_rejected() {
        let text = format!("smoothing_window = 4\n{PARAMS_ONLY}");
        assert!(matches!(load_config(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn singular_r_rejected() {
        let text = format!("{PARAMS_ONLY}\n[noise]\nr_diag = [0.0, 0.1]\n");
        assert!(matches!(load_config(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn guideline_is_a_warning_only() {
        let text = format!("{PARAMS_ONLY}\n[noise]\nq_diag = [0.001, 0.01, 0.01]\nsigma_ax = 1.0\n");
        let cfg = load_config(&text).unwrap();
        assert_eq!(cfg.guideline_warnings().len(), 1);
        let cfg = load_config(PARAMS_ONLY).unwrap();
        assert!(cfg.guideline_warnings().is_empty());
    }

    fn pos() -> impl Strategy<Value = f64> {
        prop_oneof![1e-6f64..1e3, (1e-12f64..1e-6)]
    }

    prop_compose! {
        fn arb_config()(
            p in proptest::array::uniform6(pos()),
            dt in pos(), v_min in pos(), delta_max in pos(), g in pos(), eps in pos(),
            half_window in 1usize..20,
            q in proptest::array::uniform3(0.0f64..10.0),
            off in -0.5f64..0.5,
            r in proptest::array::uniform2(1e-3f64..10.0),
            p0 in proptest::array::uniform3(0.0f64..10.0),
            sigma in proptest::option::of(0.0f64..1.0),
            lit in any::<bool>(),
            markers in proptest::option::of((0.01f64..1.0, 0.01f64..1.0)),
        ) -> Config {
            let mut c = Config::new(VehicleParams { m: p[0], l_v: p[1], l_h: p[2], j_z: p[3], c_v: p[4], c_h: p[5] });
            c.dt = dt; c.v_min = v_min; c.delta_max = delta_max; c.g = g; c.eps_den = eps;
            c.smoothing_window = 2 * half_window + 1;
            // diagonally dominant, hence PSD
            let mut qm = Matrix3::from_diagonal(&[q[0] + 1.0, q[1] + 1.0, q[2]].into());
            qm[(0, 1)] = off; qm[(1, 0)] = off;
            c.noise.q = qm;
            c.noise.r = Matrix2::from_diagonal(&r.into());
            c.noise.p0 = Matrix3::from_diagonal(&p0.into());
            c.noise.sigma_ax = sigma;
            if lit {
                c.discretization = Discretization::Reversed;
                c.bifilar = BifilarMode::SinglePi;
            }
            c.markers = markers.map(|(f, r)| MarkerOffsets { front_offset: f, rear_offset: r });
            c
        }
    }

    proptest! {
        #[test]
        fn render_round_trips(cfg in arb_config()) {
            let text = cfg.render();
            let back = load_config(&text).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
