//! `vehpred` command-line tool.
//!
//! Every command prints a block of `key=value` lines on stdout. Exit status
//! is 0 on success, 2 for input or parse errors and 3 for numerical
//! failures.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "vehpred", version, about = "Vehicle motion prediction: simulate, estimate, identify, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a manoeuvre and write truth and sensor logs.
    Simulate(SimulateArgs),
    /// Run an estimator over a sensor log.
    Estimate(EstimateArgs),
    /// Identify vehicle parameters from measurements.
    #[command(subcommand)]
    Identify(IdentifyCommand),
    /// Evaluate trajectories.
    #[command(subcommand)]
    Metrics(MetricsCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Straight,
    StepSteer,
    Circle,
    Lap,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    DynamicEkf,
    Kinematic,
}

impl From<ModelArg> for vehpred::EstimatorModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::DynamicEkf => vehpred::EstimatorModel::DynamicEkf,
            ModelArg::Kinematic => vehpred::EstimatorModel::Kinematic,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Vehicle configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "lap")]
    scenario: ScenarioArg,
    /// Sensor log to write.
    #[arg(long)]
    output: PathBuf,
    /// Also write the true trajectory at the integration step.
    #[arg(long)]
    truth_output: Option<PathBuf>,
    /// Also write a marker log (straight, step-steer and circle only use the
    /// whole run).
    #[arg(long)]
    markers_output: Option<PathBuf>,
    /// Also write a circular-run log for cornering-stiffness identification.
    #[arg(long)]
    circular_run_output: Option<PathBuf>,
    /// Target speed, m/s.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Duration, s (ignored for laps).
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Steering angle for step-steer and circle, rad.
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Time of the steering step, s.
    #[arg(long, default_value_t = 1.0)]
    step_time: f64,
    #[arg(long, default_value_t = 1)]
    laps: usize,
    /// Corner radius of the lap, m.
    #[arg(long, default_value_t = 1.5)]
    corner_radius: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generate noise-free sensor channels.
    #[arg(long)]
    noise_free: bool,
    /// Scale the cornering stiffnesses of the simulated vehicle (model
    /// mismatch against the configuration).
    #[arg(long, default_value_t = 1.0)]
    stiffness_scale: f64,
    /// Integration step, s.
    #[arg(long, default_value_t = 5e-4)]
    dt_truth: f64,
    /// Marker sampling step, s.
    #[arg(long, default_value_t = 0.01)]
    marker_dt: f64,
    /// Marker position noise, m.
    #[arg(long, default_value_t = 0.0)]
    marker_sigma: f64,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Sensor log.
    #[arg(long, required_unless_present = "bench")]
    input: Option<PathBuf>,
    /// Estimate log to write.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dynamic-ekf")]
    model: ModelArg,
    /// Absolute pose fixes (`t_s, X_m, Y_m, psi_rad`).
    #[arg(long)]
    pose_reset_log: Option<PathBuf>,
    /// Time the predict + correct cycle instead of (or after) estimating.
    #[arg(long)]
    bench: bool,
    #[arg(long, default_value_t = 100_000)]
    bench_iterations: usize,
}

#[derive(Subcommand)]
enum IdentifyCommand {
    /// Centre of gravity from axle (and side) scale loads.
    Cog(CogArgs),
    /// Yaw inertia from a bifilar pendulum.
    Inertia(InertiaArgs),
    /// Cornering stiffness from a steady circular run.
    Cornering(CorneringArgs),
}

#[derive(Args)]
struct CogArgs {
    /// Load under the front axle, N.
    #[arg(long)]
    front_load: f64,
    /// Load under the rear axle, N.
    #[arg(long)]
    rear_load: f64,
    #[arg(long)]
    left_load: Option<f64>,
    #[arg(long)]
    right_load: Option<f64>,
    /// Vehicle mass, kg.
    #[arg(long)]
    mass: f64,
    /// Wheelbase, m.
    #[arg(long)]
    wheelbase: f64,
    #[arg(long, default_value_t = 9.81)]
    g: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BifilarArg {
    Standard,
    SinglePi,
}

#[derive(Args)]
struct InertiaArgs {
    /// Cycle timestamps, one per line.
    #[arg(long)]
    cycles: PathBuf,
    /// Suspended mass, kg.
    #[arg(long)]
    mass: f64,
    /// Cord separation, m.
    #[arg(long)]
    cord_separation: f64,
    /// Cord length, m.
    #[arg(long)]
    cord_length: f64,
    #[arg(long, value_enum, default_value = "standard")]
    mode: BifilarArg,
    #[arg(long, default_value_t = 9.81)]
    g: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ForceModelArg {
    SmallAngle,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpeedSourceArg {
    Sensor,
    Optical,
}

#[derive(Args)]
struct CorneringArgs {
    /// Supplies mass, axle distances, marker offsets and smoothing window.
    #[arg(long)]
    config: PathBuf,
    /// Circular-run log.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "small-angle")]
    force_model: ForceModelArg,
    #[arg(long, value_enum, default_value = "sensor")]
    speed_source: SpeedSourceArg,
    /// Length of the steady window, s.
    #[arg(long, default_value_t = 2.0)]
    steady_window: f64,
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Closure of a trajectory log (any CSV with `t_s, X_m, Y_m, psi_rad`).
    Closure(ClosureArgs),
    /// Mean error of n-step-ahead predictions started from true poses.
    Horizon(HorizonArgs),
}

#[derive(Args)]
struct ClosureArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct HorizonArgs {
    #[arg(long)]
    config: PathBuf,
    /// Sensor log.
    #[arg(long)]
    input: PathBuf,
    /// Truth log covering the sensor timestamps.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 7)]
    horizon: usize,
    #[arg(long, value_enum, default_value = "dynamic-ekf")]
    model: ModelArg,
    /// Write the predicted poses.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Identify(IdentifyCommand::Cog(a)) => commands::identify_cog(&a),
        Command::Identify(IdentifyCommand::Inertia(a)) => commands::identify_inertia(&a),
        Command::Identify(IdentifyCommand::Cornering(a)) => commands::identify_cornering(&a),
        Command::Metrics(MetricsCommand::Closure(a)) => commands::metrics_closure(&a),
        Command::Metrics(MetricsCommand::Horizon(a)) => commands::metrics_horizon(&a),
    };
    match result {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
