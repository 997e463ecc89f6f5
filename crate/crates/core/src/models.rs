//! Kinematic and dynamic single-track models.
//!
//! Sign conventions: yaw is counter-clockwise positive and a positive
//! steering angle turns left.

use nalgebra::Matrix3;

use crate::config::Config;
use crate::error::{Denominator, Error, Result};
use crate::types::{wrap_angle, ControlInput, Pose, VehicleParams, VelocityState};

/// Time derivative of the full six-dimensional state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub dx: f64,
    pub dy: f64,
    pub dpsi: f64,
    pub dv_x: f64,
    pub dv_y: f64,
    pub dpsi_dot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipAngles {
    pub alpha_v: f64,
    pub alpha_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralForces {
    pub f_sv: f64,
    pub f_sh: f64,
}

/// One explicit-Euler step of the kinematic model. Derivatives are taken at
/// the old pose.
pub fn kinematic_step(pose: &Pose, v_x: f64, delta: f64, params: &VehicleParams, dt: f64) -> Pose {
    let psi_dot = kinematic_yaw_rate(v_x, delta, params);
    Pose {
        x: pose.x + dt * v_x * pose.psi.cos(),
        y: pose.y + dt * v_x * pose.psi.sin(),
        psi: wrap_angle(pose.psi + dt * psi_dot),
    }
}

/// Yaw rate implied by pure rolling: `v_x tan(δ) / l`.
pub fn kinematic_yaw_rate(v_x: f64, delta: f64, params: &VehicleParams) -> f64 {
    v_x / params.wheelbase() * delta.tan()
}

fn check_speed(speed: f64, v_min: f64) -> Result<()> {
    if speed >= v_min {
        Ok(())
    } else {
        Err(Error::SpeedTooLow { speed, v_min })
    }
}

/// Front and rear slip angles. The drift angle is `atan2(v_y, v_x)` and the
/// speed is the full planar magnitude.
pub fn slip_angles(
    vel: &VelocityState,
    delta: f64,
    params: &VehicleParams,
    v_min: f64,
) -> Result<SlipAngles> {
    let v = vel.speed();
    check_speed(v, v_min)?;
    let beta = vel.v_y.atan2(vel.v_x);
    Ok(SlipAngles {
        alpha_v: delta - beta - vel.psi_dot * params.l_v / v,
        alpha_h: -beta + vel.psi_dot * params.l_h / v,
    })
}

/// Linear tyre law.
pub fn lateral_forces(alphas: &SlipAngles, params: &VehicleParams) -> LateralForces {
    LateralForces {
        f_sv: params.c_v * alphas.alpha_v,
        f_sh: params.c_h * alphas.alpha_h,
    }
}

/// Continuous-time dynamic single-track model.
pub fn dynamic_derivatives(
    pose: &Pose,
    vel: &VelocityState,
    u: &ControlInput,
    params: &VehicleParams,
    v_min: f64,
) -> Result<StateDerivative> {
    let alphas = slip_angles(vel, u.delta, params, v_min)?;
    let LateralForces { f_sv, f_sh } = lateral_forces(&alphas, params);
    let (sin_psi, cos_psi) = pose.psi.sin_cos();
    let (sin_d, cos_d) = u.delta.sin_cos();
    Ok(StateDerivative {
        dx: vel.v_x * cos_psi - vel.v_y * sin_psi,
        dy: vel.v_y * cos_psi + vel.v_x * sin_psi,
        dpsi: vel.psi_dot,
        dv_x: u.a_x + vel.v_y * vel.psi_dot - f_sv * sin_d / params.m,
        dv_y: -vel.v_x * vel.psi_dot + (f_sv * cos_d + f_sh) / params.m,
        dpsi_dot: (params.l_v * f_sv * cos_d - params.l_h * f_sh) / params.j_z,
    })
}

/// Explicit-Euler pose update from the previous pose and velocities.
pub fn pose_integrate(pose: &Pose, vel: &VelocityState, dt: f64) -> Pose {
    let (sin_psi, cos_psi) = pose.psi.sin_cos();
    Pose {
        x: pose.x + dt * (vel.v_x * cos_psi - vel.v_y * sin_psi),
        y: pose.y + dt * (vel.v_x * sin_psi + vel.v_y * cos_psi),
        psi: wrap_angle(pose.psi + dt * vel.psi_dot),
    }
}

/// Sign convention of the lateral terms in the discrete velocity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Discretization {
    /// Semi-implicit Euler of the linearised continuous model: the tyre
    /// forces acting on `v_y` (resp. `psi_dot`) are evaluated at the new
    /// value, giving denominators `m v_x + dt (C_v + C_h)` and
    /// `J_z v_x + dt (l_v² C_v + l_h² C_h)`.
    #[default]
    SemiImplicit,
    /// The lateral terms with the opposite sign of `dt`, as sometimes
    /// printed (denominators `m v_x - dt (C_v + C_h)` etc.). This runs the
    /// lateral dynamics backwards in time and is kept for comparison only.
    Reversed,
}

impl Discretization {
    pub fn name(&self) -> &'static str {
        match self {
            Discretization::SemiImplicit => "semi-implicit",
            Discretization::Reversed => "reversed",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "semi-implicit" => Some(Discretization::SemiImplicit),
            "reversed" => Some(Discretization::Reversed),
            _ => None,
        }
    }
}

/// Discrete-time velocity subsystem `(v_x, v_y, psi_dot)` at a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteModel {
    pub params: VehicleParams,
    pub dt: f64,
    pub v_min: f64,
    pub eps_den: f64,
    pub discretization: Discretization,
}

struct Terms {
    num_vy: f64,
    den_vy: f64,
    num_r: f64,
    den_r: f64,
    /// Signed step used by the lateral terms.
    h: f64,
}

impl DiscreteModel {
    pub fn new(params: VehicleParams, dt: f64) -> Self {
        DiscreteModel {
            params,
            dt,
            v_min: crate::config::DEFAULT_V_MIN,
            eps_den: crate::config::DEFAULT_EPS_DEN,
            discretization: Discretization::default(),
        }
    }

    pub fn from_config(cfg: &Config) -> Self {
        DiscreteModel {
            params: cfg.params,
            dt: cfg.dt,
            v_min: cfg.v_min,
            eps_den: cfg.eps_den,
            discretization: cfg.discretization,
        }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        DiscreteModel { dt, ..self }
    }

    fn terms(&self, vel: &VelocityState, u: &ControlInput) -> Result<Terms> {
        check_speed(vel.v_x, self.v_min)?;
        let p = &self.params;
        let h = match self.discretization {
            Discretization::SemiImplicit => -self.dt,
            Discretization::Reversed => self.dt,
        };
        let VelocityState { v_x, v_y, psi_dot } = *vel;
        let k1 = p.l_v * p.c_v - p.l_h * p.c_h;
        let k2 = p.l_v * p.l_v * p.c_v + p.l_h * p.l_h * p.c_h;

        let a = p.m * v_x * v_y + h * k1 * psi_dot;
        let b = h * p.c_v * u.delta * v_x - h * p.m * v_x * v_x * psi_dot;
        let c = p.j_z * v_x * psi_dot + h * k1 * v_y;
        let d = h * p.l_v * p.c_v * u.delta * v_x;
        let den_vy = p.m * v_x - h * (p.c_v + p.c_h);
        let den_r = p.j_z * v_x - h * k2;
        if den_vy.abs() <= self.eps_den {
            return Err(Error::SingularDenominator(Denominator::LateralVelocity));
        }
        if den_r.abs() <= self.eps_den {
            return Err(Error::SingularDenominator(Denominator::YawRate));
        }
        Ok(Terms {
            num_vy: a - b,
            den_vy,
            num_r: c - d,
            den_r,
            h,
        })
    }

    /// Advances the velocity state by one step.
    pub fn step(&self, vel: &VelocityState, u: &ControlInput) -> Result<VelocityState> {
        let t = self.terms(vel, u)?;
        Ok(VelocityState {
            v_x: vel.v_x + self.dt * u.a_x,
            v_y: t.num_vy / t.den_vy,
            psi_dot: t.num_r / t.den_r,
        })
    }

    /// Closed-form Jacobian of [`DiscreteModel::step`] with respect to
    /// `(v_x, v_y, psi_dot)`.
    pub fn jacobian(&self, vel: &VelocityState, u: &ControlInput) -> Result<Matrix3<f64>> {
        let t = self.terms(vel, u)?;
        let p = &self.params;
        let h = t.h;
        let VelocityState { v_x, v_y, psi_dot } = *vel;
        let k1 = p.l_v * p.c_v - p.l_h * p.c_h;

        let dnum_vy_dvx = p.m * v_y - h * p.c_v * u.delta + 2.0 * h * p.m * v_x * psi_dot;
        let dvy_dvx = (dnum_vy_dvx * t.den_vy - t.num_vy * p.m) / (t.den_vy * t.den_vy);
        let dvy_dvy = p.m * v_x / t.den_vy;
        let dvy_dr = h * (k1 + p.m * v_x * v_x) / t.den_vy;

        let dnum_r_dvx = p.j_z * psi_dot - h * p.l_v * p.c_v * u.delta;
        let dr_dvx = (dnum_r_dvx * t.den_r - t.num_r * p.j_z) / (t.den_r * t.den_r);
        let dr_dvy = h * k1 / t.den_r;
        let dr_dr = p.j_z * v_x / t.den_r;

        Ok(Matrix3::new(
            1.0, 0.0, 0.0, //
            dvy_dvx, dvy_dvy, dvy_dr, //
            dr_dvx, dr_dvy, dr_dr,
        ))
    }
}
