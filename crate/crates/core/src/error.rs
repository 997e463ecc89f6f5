use thiserror::Error;

/// Which of the two discrete-model denominators vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Denominator {
    LateralVelocity,
    YawRate,
}

impl std::fmt::Display for Denominator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Denominator::LateralVelocity => f.write_str("lateral-velocity"),
            Denominator::YawRate => f.write_str("yaw-rate"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axle {
    Front,
    Rear,
}

impl std::fmt::Display for Axle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axle::Front => f.write_str("front"),
            Axle::Rear => f.write_str("rear"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{0}` must be strictly positive")]
    NonPositiveParameter(&'static str),

    #[error("config error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("speed {speed} m/s is below the dynamic-model threshold {v_min} m/s")]
    SpeedTooLow { speed: f64, v_min: f64 },

    #[error("{0} denominator of the discrete model is numerically zero")]
    SingularDenominator(Denominator),

    #[error("innovation covariance is numerically singular")]
    SingularInnovationCovariance,

    #[error("steering angle {delta} rad exceeds the limit of {delta_max} rad")]
    SteeringOutOfRange { delta: f64, delta_max: f64 },

    #[error("axle loads sum to {sum} N but m*g is {weight} N")]
    InconsistentLoads { sum: f64, weight: f64 },

    #[error("need at least two cycle timestamps, got {0}")]
    TooFewCycles(usize),

    #[error("cycle timestamps must be strictly increasing (index {0})")]
    NonIncreasingCycles(usize),

    #[error("front and rear markers coincide at record {0}")]
    DegenerateMarkers(usize),

    #[error("marker separation {measured} m at record {index} deviates more than 5% from {expected} m")]
    MarkerSeparation { index: usize, measured: f64, expected: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("no steady-state window found in the run")]
    NoSteadyWindow,

    #[error("{0} slip angle is too small to identify cornering stiffness")]
    SlipTooSmall(Axle),

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("trajectory is empty or has a single pose")]
    EmptyTrajectory,

    #[error("trajectory has zero path length")]
    ZeroPath,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row {row}: {source}")]
    AtRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_row(self, row: usize) -> Self {
        Error::AtRow {
            row,
            source: Box::new(self),
        }
    }

    /// Whether the failure came from input data (I/O, parsing, shape of the
    /// logs) rather than from the numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::AtRow { source, .. } => source.is_input_error(),
            Error::Parse { .. }
            | Error::NonPositiveParameter(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::GridMismatch(_)
            | Error::EmptyTrajectory
            | Error::InvalidArgument(_)
            | Error::TooFewCycles(_)
            | Error::NonIncreasingCycles(_)
            | Error::TooFewSamples { .. } => true,
            _ => false,
        }
    }

    /// Process exit status used by the command-line tool: 2 for input and
    /// parse failures, 3 for numerical or filter failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_input_error() {
            2
        } else {
            3
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
