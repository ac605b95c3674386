use thiserror::Error;

use crate::spacetime::IntervalClass;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("speed {speed} m/s is not below the boost limit {limit} m/s")]
    Superluminal { speed: f64, limit: f64 },

    #[error("events are {0:?}; before-before timing needs a space-like pair")]
    NotSpaceLike(IntervalClass),

    #[error("before-before timing unreachable: needs recession speed {required} m/s, limit {limit} m/s")]
    BeforeBeforeUnreachable { required: f64, limit: f64 },

    #[error("empty denominator: {0} is zero")]
    EmptyDenominator(&'static str),

    #[error("joint table for settings ({alice}, {bob}) is not a probability table (sum {sum})")]
    Unnormalized { alice: usize, bob: usize, sum: f64 },

    #[error("under-determined fit: {points} points, need at least {required}")]
    UnderDetermined { points: usize, required: usize },

    #[error("singular design matrix in fit")]
    SingularFit,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects values outside `[0, 1]` (including NaN).
pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::invalid(name, format!("{p} is outside [0, 1]")))
    }
}

pub(crate) fn check_finite(name: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(name, format!("{x} is not finite")))
    }
}
