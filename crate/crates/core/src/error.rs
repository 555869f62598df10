use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryError {
    ZeroNorm,
    NotOrthonormal,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::ZeroNorm => f.write_str("vector or quaternion has (near) zero norm"),
            GeometryError::NotOrthonormal => f.write_str("axes are not orthonormal"),
        }
    }
}

impl core::error::Error for GeometryError {}

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineError {
    EmptyDemo,
    TooFewSamples { needed: usize, got: usize },
    NonIncreasingTime { index: usize },
    NonFinite { index: usize },
    ZeroLength,
    LengthMismatch { a: usize, b: usize },
    InvalidStateCount(usize),
    InvalidSmoothing(f64),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::EmptyDemo => f.write_str("demonstration has no samples"),
            PipelineError::TooFewSamples { needed, got } => {
                write!(f, "need at least {needed} samples, got {got}")
            }
            PipelineError::NonIncreasingTime { index } => {
                write!(f, "sample {index}: timestamps must be strictly increasing")
            }
            PipelineError::NonFinite { index } => write!(f, "sample {index}: non-finite value"),
            PipelineError::ZeroLength => f.write_str("trajectory has zero arc length"),
            PipelineError::LengthMismatch { a, b } => {
                write!(f, "aligned trajectories differ in length ({a} vs {b})")
            }
            PipelineError::InvalidStateCount(n) => write!(f, "state count {n} is below 2"),
            PipelineError::InvalidSmoothing(s) => write!(f, "smoothing {s} must be finite and >= 0"),
        }
    }
}

impl core::error::Error for PipelineError {}

#[derive(Debug, Clone, PartialEq)]
pub enum CanalError {
    TooFewStates { needed: usize, got: usize },
    LengthMismatch,
    CoincidentDirectrix { index: usize },
    DegenerateAxes { count: usize },
    DegenerateMeanTangent,
    InvalidFraction(f64),
    InvalidWindow(usize),
    InvalidIndex(usize),
}

impl fmt::Display for CanalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CanalError::TooFewStates { needed, got } => {
                write!(f, "canal needs at least {needed} states, got {got}")
            }
            CanalError::LengthMismatch => f.write_str("canal arrays differ in length"),
            CanalError::CoincidentDirectrix { index } => {
                write!(f, "directrix points {index} and {} coincide", index + 1)
            }
            CanalError::DegenerateAxes { count } => {
                write!(f, "correction axes degenerate at {count} states")
            }
            CanalError::DegenerateMeanTangent => f.write_str("mean end tangent is near zero"),
            CanalError::InvalidFraction(x) => write!(f, "end fraction {x} outside (0, 0.5]"),
            CanalError::InvalidWindow(w) => write!(f, "axis window {w} must be >= 1"),
            CanalError::InvalidIndex(s) => write!(f, "state index {s} out of range"),
        }
    }
}

impl core::error::Error for CanalError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingError {
    StateOutOfRange(usize),
    /// The candidate horizontal axis projects to (almost) nothing on the
    /// ground plane.
    DegenerateProjection,
    InvalidUserFrame,
}

impl fmt::Display for MappingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MappingError::StateOutOfRange(s) => write!(f, "state {s} out of range"),
            MappingError::DegenerateProjection => {
                f.write_str("correction axis has no ground-plane component")
            }
            MappingError::InvalidUserFrame => {
                f.write_str("user frame must have orthonormal horizontal axes")
            }
        }
    }
}

impl core::error::Error for MappingError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlError {
    NonPositiveDt(f64),
    InvalidStick,
}

impl fmt::Display for ControlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlError::NonPositiveDt(dt) => write!(f, "time step {dt} must be > 0"),
            ControlError::InvalidStick => f.write_str("stick values must be finite in [-1, 1]"),
        }
    }
}

impl core::error::Error for ControlError {}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    ScriptOutOfOrder { index: usize },
    InvalidTimestep(f64),
    InvalidTimeout(f64),
    Control(ControlError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::ScriptOutOfOrder { index } => {
                write!(f, "script entry {index} is earlier than its predecessor")
            }
            SimError::InvalidTimestep(dt) => write!(f, "time step {dt} must be > 0"),
            SimError::InvalidTimeout(t) => write!(f, "timeout {t} must be > 0"),
            SimError::Control(e) => write!(f, "controller: {e}"),
        }
    }
}

impl core::error::Error for SimError {}

impl From<ControlError> for SimError {
    fn from(e: ControlError) -> Self {
        SimError::Control(e)
    }
}
