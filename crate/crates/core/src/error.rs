use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Displacement/velocity component names used in diagnostics.
pub(crate) const COMPONENT_NAMES: [&str; 6] = ["u", "v", "w", "u_dot", "v_dot", "w_dot"];

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    Domain { what: &'static str, value: f64 },
    /// Poisson ratio at or above 0.5 makes the Lamé constant λ unbounded.
    SingularMaterial { poisson_ratio: f64 },
    /// Invalid configuration, with the offending field path.
    Config { field: String, reason: String },
    /// An operation was called in a state its contract excludes.
    Contract(&'static str),
    /// A state entry is NaN or infinite.
    Integrity {
        patch: usize,
        component: &'static str,
        i: usize,
        j: usize,
        k: usize,
        value: f64,
    },
    /// The adaptive integrator could not make progress.
    StepSizeUnderflow { t: f64, step: f64 },
    /// Not enough samples to estimate a quantity.
    InsufficientData(&'static str),
    /// The right-hand side failed a linearity spot-check.
    Linearity { column: usize, deviation: f64 },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::SingularMaterial { poisson_ratio } => {
                write!(f, "singular material: poisson ratio {poisson_ratio} must be below 0.5")
            }
            Error::Config { field, reason } => write!(f, "invalid configuration `{field}`: {reason}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Integrity { patch, component, i, j, k, value } => write!(
                f,
                "non-finite state value {value} in patch {patch}, component {component} at node ({i}, {j}, {k})"
            ),
            Error::StepSizeUnderflow { t, step } => {
                write!(f, "step size underflow ({step:e}) at t = {t}; system too stiff")
            }
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::Linearity { column, deviation } => {
                write!(f, "right-hand side is not linear in column {column} (deviation {deviation:e})")
            }
        }
    }
}

impl core::error::Error for Error {}
