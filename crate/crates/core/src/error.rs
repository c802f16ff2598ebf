use alloc::string::String;
use core::fmt;

/// Error type shared by every operation in the core crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A value violates a type invariant (non-monotonic time, bad quaternion, ...).
    Validation(String),
    /// Input too short for the requested operation.
    TooShort { needed: usize, got: usize },
    /// An IMU bin between two EKF outputs held no samples.
    EmptyImuBin { bin: usize },
    /// The EKF velocity never exceeded the takeoff threshold for the hold time.
    NoTakeoff,
    /// Tensor or parameter shapes disagree.
    Shape(String),
    /// Configuration value out of range.
    Config(String),
    /// Training produced a non-finite loss.
    Diverged { epoch: usize, batch: usize },
    /// A length or alignment mismatch between two series.
    LengthMismatch { left: usize, right: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::TooShort { needed, got } => {
                write!(f, "series too short: need {needed}, got {got}")
            }
            Error::EmptyImuBin { bin } => write!(f, "no IMU samples in bin {bin}"),
            Error::NoTakeoff => write!(f, "no takeoff found"),
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Diverged { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch}, batch {batch}")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
        }
    }
}

#[cfg(feature = "std")]
extern crate std;

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
