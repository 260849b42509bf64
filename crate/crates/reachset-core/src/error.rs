use core::fmt;

/// Errors shared across the geometry, ODE, enumeration, and screening layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Error {
    /// A scalar or vector argument violates a documented precondition.
    InvalidInput(&'static str),
    /// The torsion ODE reached `|tau| < TAU_MIN`; payload is the arc length
    /// at which integration stopped.
    TorsionSingularity { arc_length: f64 },
    /// A path was evaluated outside `[0, total_length]`.
    OutOfRange { s: f64, total: f64 },
    /// An initial frame failed the orthonormality check.
    InvalidFrame { defect: f64 },
    /// A candidate grid has an empty resolution or no families to emit.
    InvalidGrid(&'static str),
    /// A costate trajectory was constructed with `p == 0` and `p0 == 0`.
    NontrivialityViolated,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(what) => write!(f, "invalid input: {what}"),
            Error::TorsionSingularity { arc_length } => {
                write!(f, "torsion singularity at arc length {arc_length}")
            }
            Error::OutOfRange { s, total } => {
                write!(f, "arc length {s} outside [0, {total}]")
            }
            Error::InvalidFrame { defect } => {
                write!(f, "frame orthonormality defect {defect} exceeds tolerance")
            }
            Error::InvalidGrid(what) => write!(f, "invalid candidate grid: {what}"),
            Error::NontrivialityViolated => {
                write!(f, "costate and abnormal multiplier are both zero")
            }
        }
    }
}
