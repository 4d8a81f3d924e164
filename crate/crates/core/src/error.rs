use alloc::string::String;

use crate::series::EventSeries;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Kernel or model parameters outside their admissible set.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// A function argument outside its domain (negative time, bad probability, ...).
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// The simulator hit its event cap; the events generated so far are kept.
    #[error("simulation truncated after {} events (cap {cap})", partial.len())]
    Truncated { partial: EventSeries, cap: usize },

    #[error("conditional intensity is not positive at event {index} (t = {time})")]
    NonPositiveIntensity { index: usize, time: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    /// An event falls in a zero-rate bin of a detrending profile.
    #[error("degenerate intensity profile: event at t = {time} lies in zero-rate bin {bin}")]
    DegenerateProfile { bin: usize, time: f64 },

    #[error("invalid series: {0}")]
    InvalidSeries(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
