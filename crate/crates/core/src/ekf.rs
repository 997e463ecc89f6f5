//! Extended Kalman filter over `(v_x, v_y, psi_dot)`.
//!
//! The pose is dead-reckoned from the filtered velocities outside the
//! filter and carries no covariance.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::models::{kinematic_step, kinematic_yaw_rate, pose_integrate, DiscreteModel};
use crate::types::{ControlInput, Measurement, Pose, VelocityState};

/// Maps `(v_x, v_y, psi_dot)` to the measurement vector `(psi_dot, v_x)`.
pub fn measurement_matrix() -> Matrix2x3<f64> {
    Matrix2x3::new(
        0.0, 0.0, 1.0, //
        1.0, 0.0, 0.0,
    )
}

fn symmetrize(p: &Matrix3<f64>) -> Matrix3<f64> {
    (p + p.transpose()) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterEstimate {
    pub vel: VelocityState,
    pub pose: Pose,
    /// Covariance over `(v_x, v_y, psi_dot)`.
    pub p: Matrix3<f64>,
    pub t: f64,
}

impl FilterEstimate {
    pub fn new(vel: VelocityState, pose: Pose, p: Matrix3<f64>, t: f64) -> Self {
        FilterEstimate {
            vel,
            pose: Pose::new(pose.x, pose.y, pose.psi),
            p,
            t,
        }
    }

    /// Estimate seeded with the configured initial covariance.
    pub fn initial(vel: VelocityState, pose: Pose, t: f64, cfg: &Config) -> Self {
        FilterEstimate::new(vel, pose, cfg.noise.p0, t)
    }

    /// Time update. Below `cfg.v_min` the kinematic model propagates the
    /// pose, `v_y` is held at zero, the yaw rate follows the rolling
    /// condition and `Q` is added to `P` unchanged.
    pub fn predict(&self, u: &ControlInput, cfg: &Config) -> Result<FilterEstimate> {
        u.check_steering(cfg.delta_max)?;
        if self.vel.v_x < cfg.v_min {
            return Ok(self.predict_kinematic(u, cfg));
        }
        let model = DiscreteModel::from_config(cfg);
        let vel = model.step(&self.vel, u)?;
        let phi = model.jacobian(&self.vel, u)?;
        let p = symmetrize(&(phi * self.p * phi.transpose() + cfg.noise.q));
        Ok(FilterEstimate {
            vel,
            pose: pose_integrate(&self.pose, &self.vel, cfg.dt),
            p,
            t: self.t + cfg.dt,
        })
    }

    fn predict_kinematic(&self, u: &ControlInput, cfg: &Config) -> FilterEstimate {
        let v_x = self.vel.v_x;
        FilterEstimate {
            vel: VelocityState {
                v_x: v_x + cfg.dt * u.a_x,
                v_y: 0.0,
                psi_dot: kinematic_yaw_rate(v_x, u.delta, &cfg.params),
            },
            pose: kinematic_step(&self.pose, v_x, u.delta, &cfg.params, cfg.dt),
            p: self.p + cfg.noise.q,
            t: self.t + cfg.dt,
        }
    }

    /// Measurement update with a Joseph-form covariance update.
    pub fn correct(&self, z: &Measurement, cfg: &Config) -> Result<FilterEstimate> {
        let h = measurement_matrix();
        let r = cfg.noise.r;
        let s: Matrix2<f64> = h * self.p * h.transpose() + r;
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularInnovationCovariance);
        }
        let s_inv = s
            .cholesky()
            .ok_or(Error::SingularInnovationCovariance)?
            .inverse();
        let k: Matrix3x2<f64> = self.p * h.transpose() * s_inv;
        let innovation = z.to_vector() - h * self.vel.to_vector();
        let vel = VelocityState::from_vector(&(self.vel.to_vector() + k * innovation));
        let a = Matrix3::identity() - k * h;
        let p = symmetrize(&(a * self.p * a.transpose() + k * r * k.transpose()));
        Ok(FilterEstimate { vel, p, ..*self })
    }

    /// Predict, then correct when a measurement is available.
    pub fn step(
        &self,
        u: &ControlInput,
        z: Option<&Measurement>,
        cfg: &Config,
    ) -> Result<FilterEstimate> {
        let prior = self.predict(u, cfg)?;
        match z {
            Some(z) => prior.correct(z, cfg),
            None => Ok(prior),
        }
    }

    /// Replaces the pose (e.g. with an external camera fix).
    pub fn reset_pose(&self, pose: Pose) -> FilterEstimate {
        FilterEstimate {
            pose: Pose::new(pose.x, pose.y, pose.psi),
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::VehicleParams;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cfg() -> Config {
        Config::new(VehicleParams::new(4.0, 0.18, 0.18, 0.05, 50.0, 50.0).unwrap())
    }

    type M3 = [[f64; 3]; 3];

    // Independent dense-matrix oracle on plain arrays.
    fn mul(a: &M3, b: &M3) -> M3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    }

    fn tr(a: &M3) -> M3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = a[j][i];
            }
        }
        out
    }

    fn to_arr(m: &Matrix3<f64>) -> M3 {
        std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
    }

    #[test]
    fn predict_with_identity_transition_keeps_p() {
        let mut c = cfg();
        c.dt = 1e-300;
        c.noise.q = Matrix3::zeros();
        let p = Matrix3::new(0.3, 0.01, 0.0, 0.01, 0.2, 0.02, 0.0, 0.02, 0.1);
        let est = FilterEstimate::new(VelocityState::new(1.2, 0.1, 0.3), Pose::origin(), p, 0.0);
        let out = est.predict(&ControlInput::new(0.1, 0.0), &c).unwrap();
        assert_relative_eq!(out.p, p, epsilon = 1e-15);
    }

    #[test]
    fn predict_straight_equilibrium() {
        let c = cfg();
        let p = Matrix3::from_diagonal(&[0.2, 0.1, 0.3].into());
        let est = FilterEstimate::new(VelocityState::new(1.0, 0.0, 0.0), Pose::origin(), p, 0.0);
        let out = est.predict(&ControlInput::default(), &c).unwrap();
        assert_eq!(out.vel, est.vel);
        let phi = DiscreteModel::from_config(&c)
            .jacobian(&est.vel, &ControlInput::default())
            .unwrap();
        let expected = phi * p * phi.transpose() + c.noise.q;
        assert_relative_eq!(out.p, expected, epsilon = 1e-15);
        for i in 0..3 {
            assert!(out.p[(i, i)] >= c.noise.q[(i, i)]);
        }
        assert_relative_eq!(out.t, 0.005);
        assert_relative_eq!(out.pose.x, 0.005);
    }

    #[test]
    fn predict_matches_dense_oracle() {
        let c = cfg();
        let p = Matrix3::new(0.31, 0.02, -0.01, 0.02, 0.12, 0.03, -0.01, 0.03, 0.2);
        let vel = VelocityState::new(1.8, -0.07, 0.9);
        let u = ControlInput::new(-0.21, 0.3);
        let out = FilterEstimate::new(vel, Pose::origin(), p, 0.0).predict(&u, &c).unwrap();
        let phi = to_arr(&DiscreteModel::from_config(&c).jacobian(&vel, &u).unwrap());
        let mut expected = mul(&mul(&phi, &to_arr(&p)), &tr(&phi));
        for i in 0..3 {
            expected[i][i] += c.noise.q[(i, i)];
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(out.p[(i, j)], expected[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn zero_innovation_keeps_state_and_shrinks_p() {
        let c = cfg();
        let est = FilterEstimate::new(
            VelocityState::new(1.3, 0.05, 0.4),
            Pose::new(1.0, 2.0, 0.3),
            Matrix3::from_diagonal(&[0.1, 0.05, 0.2].into()),
            1.0,
        );
        let out = est.correct(&Measurement::new(0.4, 1.3), &c).unwrap();
        assert_eq!(out.vel, est.vel);
        assert_eq!(out.pose, est.pose);
        assert!(out.p.trace() <= est.p.trace());
    }

    #[test]
    fn distrusted_measurement_is_ignored() {
        let mut c = cfg();
        c.noise.r *= 1e9;
        let est = FilterEstimate::initial(VelocityState::new(1.0, 0.0, 0.2), Pose::origin(), 0.0, &c);
        let out = est.correct(&Measurement::new(0.9, 1.5), &c).unwrap();
        assert!((out.vel.v_x - 1.0).abs() < 1e-6);
        assert!((out.vel.psi_dot - 0.2).abs() < 1e-6);
    }

    #[test]
    fn correct_matches_hand_oracle() {
        // P = I, R = diag(0.125, 0.10), innovation (0.1, 0.05).
        // S = diag(1.125, 1.10); K maps psi_dot with 1/1.125 and v_x with 1/1.1.
        let c = cfg();
        let vel = VelocityState::new(1.0, 0.0, 0.2);
        let est = FilterEstimate::new(vel, Pose::origin(), Matrix3::identity(), 0.0);
        let out = est.correct(&Measurement::new(0.3, 1.05), &c).unwrap();
        assert_relative_eq!(out.vel.v_x, 1.0 + 0.05 / 1.1, epsilon = 1e-15);
        assert_relative_eq!(out.vel.v_y, 0.0);
        assert_relative_eq!(out.vel.psi_dot, 0.2 + 0.1 / 1.125, epsilon = 1e-15);
        // Joseph form: (1-k)^2 + k^2 r with k = 1/(1+r) equals r/(1+r).
        assert_relative_eq!(out.p[(0, 0)], 0.1 / 1.1, epsilon = 1e-15);
        assert_relative_eq!(out.p[(1, 1)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(out.p[(2, 2)], 0.125 / 1.125, epsilon = 1e-15);
        assert_eq!(out.p[(0, 2)], 0.0);
    }

    #[test]
    fn singular_innovation_detected() {
        let mut c = cfg();
        c.noise.r = Matrix2::zeros();
        let est = FilterEstimate::new(VelocityState::new(1.0, 0.0, 0.0), Pose::origin(), Matrix3::zeros(), 0.0);
        assert!(matches!(
            est.correct(&Measurement::new(0.0, 1.0), &c),
            Err(Error::SingularInnovationCovariance)
        ));
    }

    #[test]
    fn step_composes() {
        let c = cfg();
        let est = FilterEstimate::initial(VelocityState::new(1.2, 0.01, 0.3), Pose::origin(), 0.0, &c);
        let u = ControlInput::new(0.1, 0.2);
        let z = Measurement::new(0.31, 1.19);
        assert_eq!(est.step(&u, None, &c).unwrap(), est.predict(&u, &c).unwrap());
        assert_eq!(
            est.step(&u, Some(&z), &c).unwrap(),
            est.predict(&u, &c).unwrap().correct(&z, &c).unwrap()
        );
    }

    #[test]
    fn seven_steps_span_35_ms() {
        let c = cfg();
        let mut est = FilterEstimate::initial(VelocityState::new(1.0, 0.0, 0.0), Pose::origin(), 0.0, &c);
        for _ in 0..7 {
            est = est.step(&ControlInput::default(), None, &c).unwrap();
        }
        assert!((est.t - 0.035).abs() < 1e-15);
    }

    #[test]
    fn reset_pose_examples() {
        let c = cfg();
        let est = FilterEstimate::initial(VelocityState::new(1.0, 0.1, 0.2), Pose::new(1.0, 2.0, 0.5), 0.0, &c);
        assert_eq!(est.reset_pose(est.pose), est);
        let out = est.reset_pose(Pose::origin());
        assert_eq!(out.pose, Pose::origin());
        assert_eq!(out.vel, est.vel);
        assert_eq!(out.p, est.p);
        let out = est.reset_pose(Pose { x: 0.0, y: 0.0, psi: 3.0 * PI });
        assert_eq!(out.pose.psi, PI);
    }

    #[test]
    fn kinematic_fallback_below_v_min() {
        let c = cfg();
        let est = FilterEstimate::initial(VelocityState::new(0.05, 0.02, 0.1), Pose::origin(), 0.0, &c);
        let out = est.predict(&ControlInput::new(0.2, 1.0), &c).unwrap();
        assert_eq!(out.vel.v_y, 0.0);
        assert_relative_eq!(out.vel.v_x, 0.055);
        assert_relative_eq!(out.vel.psi_dot, 0.05 * 0.2f64.tan() / 0.36);
        assert_eq!(out.p, est.p + c.noise.q);
        assert_relative_eq!(out.pose.x, 0.05 * 0.005);
    }

    #[test]
    fn steering_limit_enforced() {
        let c = cfg();
        let est = FilterEstimate::initial(VelocityState::new(1.0, 0.0, 0.0), Pose::origin(), 0.0, &c);
        assert!(matches!(
            est.predict(&ControlInput::new(0.7, 0.0), &c),
            Err(Error::SteeringOutOfRange { .. })
        ));
    }

    #[test]
    fn gain_entries_in_unit_interval() {
        // P^- = Q after one predict from P = 0.
        let c = cfg();
        let est = FilterEstimate::new(VelocityState::new(1.5, 0.0, 0.0), Pose::origin(), Matrix3::zeros(), 0.0);
        let prior = est.predict(&ControlInput::default(), &c).unwrap();
        assert_relative_eq!(prior.p, c.noise.q, epsilon = 1e-15);
        let h = measurement_matrix();
        let s = h * prior.p * h.transpose() + c.noise.r;
        let k = prior.p * h.transpose() * s.try_inverse().unwrap();
        for (row, col) in [(2, 0), (0, 1)] {
            assert!((0.0..=1.0).contains(&k[(row, col)]), "{}", k[(row, col)]);
        }
    }
}
