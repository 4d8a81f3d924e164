//! Event series, background intensity profiles and model parameters.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// A realization `{t_i}` observed on the window `(window_start, window_end]`.
///
/// Times are nondecreasing. Simulators emit strictly increasing times; ties
/// only appear after preprocessing such as [`crate::preprocess::bundle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    pub times: Vec<f64>,
    pub window_start: f64,
    pub window_end: f64,
}

impl EventSeries {
    /// Builds a series, checking ordering and that every event lies in the window.
    pub fn new(times: Vec<f64>, window_start: f64, window_end: f64) -> Result<Self> {
        if !(window_start.is_finite() && window_end.is_finite() && window_start <= window_end) {
            return Err(Error::InvalidSeries(format!(
                "window ({window_start}, {window_end}] is not a finite interval"
            )));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidSeries(format!(
                "times decrease at index {}: {} > {}",
                i + 1,
                times[i],
                times[i + 1]
            )));
        }
        if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
            if first < window_start || last > window_end {
                return Err(Error::InvalidSeries(format!(
                    "events [{first}, {last}] fall outside the window ({window_start}, {window_end}]"
                )));
            }
        }
        Ok(EventSeries {
            times,
            window_start,
            window_end,
        })
    }

    pub fn empty(window_start: f64, window_end: f64) -> Self {
        EventSeries {
            times: Vec::new(),
            window_start,
            window_end,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Window length `T`.
    pub fn duration(&self) -> f64 {
        self.window_end - self.window_start
    }

    /// Counting process `N(t)`: number of events with `t_i ≤ t`.
    pub fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// Index of the first tie (`t_i == t_{i-1}`), if any.
    pub fn first_tie(&self) -> Option<usize> {
        self.times.windows(2).position(|w| w[0] == w[1]).map(|i| i + 1)
    }

    /// Consecutive inter-event durations `t_{i+1} - t_i`.
    pub fn durations(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Events in `(start, end]`, keeping absolute times.
    pub fn slice(&self, start: f64, end: f64) -> EventSeries {
        let lo = self.times.partition_point(|&t| t <= start);
        let hi = self.times.partition_point(|&t| t <= end);
        EventSeries {
            times: self.times[lo..hi].to_vec(),
            window_start: start,
            window_end: end,
        }
    }

    /// Shifts all times and the window by `offset`.
    pub fn shifted(&self, offset: f64) -> EventSeries {
        EventSeries {
            times: self.times.iter().map(|t| t + offset).collect(),
            window_start: self.window_start + offset,
            window_end: self.window_end + offset,
        }
    }

    /// Multiplies all times and the window by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> EventSeries {
        EventSeries {
            times: self.times.iter().map(|t| t * factor).collect(),
            window_start: self.window_start * factor,
            window_end: self.window_end * factor,
        }
    }
}

/// Piecewise-constant background rate: `rates[k]` applies on
/// `[breakpoints[k], breakpoints[k + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundProfile {
    pub breakpoints: Vec<f64>,
    pub rates: Vec<f64>,
}

impl BackgroundProfile {
    pub fn new(breakpoints: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || breakpoints.len() != rates.len() + 1 {
            return Err(Error::param(format!(
                "profile needs len(breakpoints) = len(rates) + 1 >= 2, got {} and {}",
                breakpoints.len(),
                rates.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::param("profile breakpoints must be finite and strictly increasing"));
        }
        if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::param("profile rates must be finite and nonnegative"));
        }
        Ok(BackgroundProfile { breakpoints, rates })
    }

    /// A single segment with constant `rate` over `(start, end]`.
    pub fn constant(start: f64, end: f64, rate: f64) -> Result<Self> {
        Self::new(alloc::vec![start, end], alloc::vec![rate])
    }

    /// Equal-length segments starting at `start`.
    pub fn uniform_segments(start: f64, segment: f64, rates: Vec<f64>) -> Result<Self> {
        let breakpoints = (0..=rates.len()).map(|k| start + k as f64 * segment).collect();
        Self::new(breakpoints, rates)
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    fn segment(&self, t: f64) -> Option<usize> {
        if t < self.start() || t >= self.end() {
            return None;
        }
        Some(self.breakpoints.partition_point(|&b| b <= t) - 1)
    }

    /// Rate at `t`; zero outside the profile span.
    pub fn rate_at(&self, t: f64) -> f64 {
        self.segment(t).map_or(0.0, |k| self.rates[k])
    }

    /// `∫_{start}^{t} μ(s) ds`, clamped to the span.
    pub fn cumulative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &r) in self.rates.iter().enumerate() {
            let (a, b) = (self.breakpoints[k], self.breakpoints[k + 1]);
            if t <= a {
                break;
            }
            acc += r * (t.min(b) - a);
        }
        acc
    }

    /// First breakpoint strictly after `t`, if any.
    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        let i = self.breakpoints.partition_point(|&b| b <= t);
        self.breakpoints.get(i).copied()
    }
}

/// Background intensity `μ(t)`: a constant or a piecewise-constant profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Background {
    Constant(f64),
    Profile(BackgroundProfile),
}

impl Background {
    pub fn rate_at(&self, t: f64) -> f64 {
        match self {
            Background::Constant(mu) => *mu,
            Background::Profile(p) => p.rate_at(t),
        }
    }

    /// `∫_{from}^{to} μ(s) ds`.
    pub fn integral(&self, from: f64, to: f64) -> f64 {
        match self {
            Background::Constant(mu) => mu * (to - from),
            Background::Profile(p) => p.cumulative(to) - p.cumulative(from),
        }
    }

    /// Largest rate on `[t, next change)` together with that change point.
    pub(crate) fn local_bound(&self, t: f64) -> (f64, Option<f64>) {
        match self {
            Background::Constant(mu) => (*mu, None),
            Background::Profile(p) => (p.rate_at(t), p.next_breakpoint(t)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Background::Constant(mu) if !(*mu >= 0.0 && mu.is_finite()) => {
                Err(Error::param(format!("background rate must be finite and >= 0, got {mu}")))
            }
            Background::Profile(p) => BackgroundProfile::new(p.breakpoints.clone(), p.rates.clone()).map(|_| ()),
            _ => Ok(()),
        }
    }
}

/// Full model `λ(t) = μ(t) + n Σ_{t_i<t} h(t - t_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub mu: Background,
    pub n: f64,
    pub kernel: KernelSpec,
}

impl HawkesParams {
    pub fn new(mu: f64, n: f64, kernel: KernelSpec) -> Self {
        HawkesParams {
            mu: Background::Constant(mu),
            n,
            kernel,
        }
    }

    pub fn with_profile(profile: BackgroundProfile, n: f64, kernel: KernelSpec) -> Self {
        HawkesParams {
            mu: Background::Profile(profile),
            n,
            kernel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mu.validate()?;
        if !(self.n >= 0.0 && self.n.is_finite()) {
            return Err(Error::param(format!("branching ratio must be finite and >= 0, got {}", self.n)));
        }
        self.kernel.build().map(|_| ())
    }

    /// Whether the stationary regime exists (`n < 1`).
    pub fn is_subcritical(&self) -> bool {
        self.n < 1.0
    }
}
