//! Motion prediction for a small autonomous vehicle.
//!
//! Kinematic and dynamic single-track models, a three-state extended
//! Kalman filter over `(v_x, v_y, psi_dot)`, vehicle parameter
//! identification (centre of gravity, yaw inertia, cornering stiffness) and
//! a truth simulator that produces synthetic sensor logs.

pub mod config;
pub mod ekf;
pub mod error;
pub mod estimate;
pub mod io;
pub mod metrics;
pub mod models;
pub mod param_id;
pub mod sim;
pub mod types;

pub use config::{load_config, Config, MarkerOffsets, NoiseConfig};
pub use ekf::{measurement_matrix, FilterEstimate};
pub use error::{Axle, Denominator, Error, Result};
pub use estimate::{run_estimate, EstimateOptions, EstimateRecord, EstimateRun, EstimatorModel, PoseFix};
pub use metrics::{closure_metrics, horizon_error, ClosureMetrics, HorizonStats};
pub use models::{DiscreteModel, Discretization};
pub use sim::{simulate, synthesize_sensors, Scenario, ScenarioKind, SensorNoise, SensorRecord, TruthRecord};
pub use types::{wrap_angle, ControlInput, Measurement, Pose, VehicleParams, VelocityState};
