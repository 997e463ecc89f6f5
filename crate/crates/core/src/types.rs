//! Value types shared by the models, the filter and the identification code.
//!
//! All quantities are SI with angles in radians.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`.
///
/// Angles already inside the interval are returned untouched, so the
/// function is exactly idempotent.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Physical constants of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Mass, kg.
    pub m: f64,
    /// CoG to front axle, m.
    pub l_v: f64,
    /// CoG to rear axle, m.
    pub l_h: f64,
    /// Yaw moment of inertia, kg·m².
    pub j_z: f64,
    /// Front axle cornering stiffness, N/rad.
    pub c_v: f64,
    /// Rear axle cornering stiffness, N/rad.
    pub c_h: f64,
}

impl VehicleParams {
    /// Builds and validates a parameter set.
    pub fn new(m: f64, l_v: f64, l_h: f64, j_z: f64, c_v: f64, c_h: f64) -> Result<Self> {
        VehicleParams {
            m,
            l_v,
            l_h,
            j_z,
            c_v,
            c_h,
        }
        .validate()
    }

    /// Returns the parameters unchanged iff every field is strictly positive
    /// (and finite). The error names the first offending field.
    pub fn validate(self) -> Result<Self> {
        let fields = [
            ("m", self.m),
            ("l_v", self.l_v),
            ("l_h", self.l_h),
            ("j_z", self.j_z),
            ("c_v", self.c_v),
            ("c_h", self.c_h),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveParameter(name));
            }
        }
        Ok(self)
    }

    /// Wheelbase `l_v + l_h`.
    pub fn wheelbase(&self) -> f64 {
        self.l_v + self.l_h
    }

    /// Same vehicle with both cornering stiffnesses multiplied by `factor`.
    pub fn with_stiffness_scale(self, factor: f64) -> Self {
        VehicleParams {
            c_v: self.c_v * factor,
            c_h: self.c_h * factor,
            ..self
        }
    }
}

/// Planar pose of the centre of gravity. `psi` is kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Pose {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn origin() -> Self {
        Pose::default()
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The filter state: body-frame velocities and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityState {
    pub v_x: f64,
    pub v_y: f64,
    pub psi_dot: f64,
}

impl VelocityState {
    pub fn new(v_x: f64, v_y: f64, psi_dot: f64) -> Self {
        VelocityState { v_x, v_y, psi_dot }
    }

    /// Magnitude of the planar velocity.
    pub fn speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }

    pub fn is_finite(&self) -> bool {
        self.v_x.is_finite() && self.v_y.is_finite() && self.psi_dot.is_finite()
    }

    pub fn to_vector(self) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new(self.v_x, self.v_y, self.psi_dot)
    }

    pub fn from_vector(v: &nalgebra::Vector3<f64>) -> Self {
        VelocityState::new(v[0], v[1], v[2])
    }
}

/// Front steering angle and longitudinal acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub delta: f64,
    pub a_x: f64,
}

impl ControlInput {
    pub fn new(delta: f64, a_x: f64) -> Self {
        ControlInput { delta, a_x }
    }

    pub fn check_steering(&self, delta_max: f64) -> Result<()> {
        if self.delta.abs() <= delta_max {
            Ok(())
        } else {
            Err(Error::SteeringOutOfRange {
                delta: self.delta,
                delta_max,
            })
        }
    }
}

/// Yaw-rate and longitudinal-speed measurement, in the order of the
/// measurement vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub psi_dot: f64,
    pub v_x: f64,
}

impl Measurement {
    pub fn new(psi_dot: f64, v_x: f64) -> Self {
        Measurement { psi_dot, v_x }
    }

    pub fn to_vector(self) -> nalgebra::Vector2<f64> {
        nalgebra::Vector2::new(self.psi_dot, self.v_x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> VehicleParams {
        VehicleParams {
            m: 4.0,
            l_v: 0.18,
            l_h: 0.18,
            j_z: 0.05,
            c_v: 50.0,
            c_h: 50.0,
        }
    }

    #[test]
    fn validate_accepts_positive() {
        assert_eq!(sample().validate().unwrap(), sample());
        assert!((sample().wheelbase() - 0.36).abs() < 1e-15);
    }

    #[test]
    fn validate_names_first_bad_field() {
        let p = VehicleParams { m: 0.0, ..sample() };
        assert!(matches!(p.validate(), Err(Error::NonPositiveParameter("m"))));
        let p = VehicleParams {
            c_h: -50.0,
            ..sample()
        };
        assert!(matches!(p.validate(), Err(Error::NonPositiveParameter("c_h"))));
        let p = VehicleParams {
            j_z: f64::NAN,
            ..sample()
        };
        assert!(matches!(p.validate(), Err(Error::NonPositiveParameter("j_z"))));
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert_eq!(wrap_angle(-3.0 * PI), PI);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn pose_wraps_heading() {
        assert_eq!(Pose::new(0.0, 0.0, 3.0 * PI).psi, PI);
    }

    fn same_angle(a: f64, b: f64, tol: f64) -> bool {
        let d = (a - b).abs();
        d < tol || (2.0 * PI - d).abs() < tol
    }

    proptest! {
        #[test]
        fn wrap_in_range_and_idempotent(x in -1e3f64..1e3) {
            let w = wrap_angle(x);
            prop_assert!(w > -PI && w <= PI);
            prop_assert_eq!(wrap_angle(w), w);
            prop_assert!(same_angle(((x - w) / (2.0 * PI)).round() * 2.0 * PI + w, x, 1e-9));
        }

        #[test]
        fn wrap_is_2pi_periodic(x in -10.0f64..10.0, k in -10i32..=10) {
            let a = wrap_angle(x);
            let b = wrap_angle(x + 2.0 * PI * k as f64);
            prop_assert!(same_angle(a, b, 1e-12), "{} vs {}", a, b);
        }

        #[test]
        fn validate_accepts_exactly_positive(
            vals in proptest::array::uniform6(prop_oneof![-1.0f64..1.0, Just(0.0), 1e-6f64..100.0])
        ) {
            let p = VehicleParams { m: vals[0], l_v: vals[1], l_h: vals[2], j_z: vals[3], c_v: vals[4], c_h: vals[5] };
            prop_assert_eq!(p.validate().is_ok(), vals.iter().all(|v| *v > 0.0));
        }
    }
}
