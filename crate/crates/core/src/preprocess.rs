//! Event-time transforms: outlier injection, bundling, randomization,
//! intensity-profile estimation, detrending and concatenation.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::series::{BackgroundProfile, EventSeries};
use crate::simulate::rng_from_seed;

/// `floor(t/δ)` treating values within rounding of a grid point as on it.
fn grid_index_floor(t: f64, delta: f64) -> f64 {
    let q = t / delta;
    let r = math::floor(q + 0.5);
    if (q - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        math::floor(q)
    }
}

fn grid_index_ceil(t: f64, delta: f64) -> f64 {
    let q = t / delta;
    let r = math::floor(q + 0.5);
    if (q - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        math::ceil(q)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Replaces `⌊fraction·(N-1)⌋` randomly chosen durations (without
/// replacement) by `multiplier` times the largest original duration and
/// rebuilds the times by cumulative summation from the first event. The
/// window end moves with the last event.
pub fn inject_outliers(series: &EventSeries, fraction: f64, multiplier: f64, seed: u64) -> Result<EventSeries> {
    if series.len() < 2 {
        return Err(Error::InsufficientData("outlier injection needs at least two events".into()));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::param(format!("outlier fraction must lie in [0, 1], got {fraction}")));
    }
    if !(multiplier >= 1.0 && multiplier.is_finite()) {
        return Err(Error::param(format!("outlier multiplier must be >= 1, got {multiplier}")));
    }
    let mut durations = series.durations();
    let count = math::floor(fraction * durations.len() as f64) as usize;
    if count == 0 {
        if fraction > 0.0 {
            log::warn!(
                "outlier fraction {fraction} of {} durations rounds to zero; series left unchanged",
                durations.len()
            );
        }
        return Ok(series.clone());
    }
    let max = durations.iter().copied().fold(0.0, f64::max);
    let mut rng = rng_from_seed(seed);
    for i in index::sample(&mut rng, durations.len(), count) {
        durations[i] = multiplier * max;
    }
    let first = series.times[0];
    let mut t = first;
    let mut times = Vec::with_capacity(series.len());
    times.push(first);
    for d in durations {
        t += d;
        times.push(t);
    }
    let old_last = *series.times.last().unwrap();
    let window_end = series.window_end + (t - old_last);
    Ok(EventSeries {
        times,
        window_start: series.window_start,
        window_end,
    })
}

/// Which edge of its packet an event is stamped with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleEdge {
    /// `ceil(t/δ)·δ`, the dispatch instant.
    #[default]
    Right,
    /// `floor(t/δ)·δ`.
    Left,
}

/// Quantizes every timestamp to a packet edge of width `delta`. Order is
/// preserved, so ties keep their original order.
pub fn bundle(series: &EventSeries, delta: f64, edge: BundleEdge) -> Result<EventSeries> {
    positive("bundle width", delta)?;
    let stamp = |t: f64| match edge {
        BundleEdge::Right => grid_index_ceil(t, delta) * delta,
        BundleEdge::Left => grid_index_floor(t, delta) * delta,
    };
    let times: Vec<f64> = series.times.iter().map(|&t| stamp(t)).collect();
    let first = times.first().copied().unwrap_or(series.window_start);
    let last = times.last().copied().unwrap_or(series.window_end);
    Ok(EventSeries {
        times,
        window_start: series.window_start.min(first),
        window_end: series.window_end.max(last).max(stamp(series.window_end)),
    })
}

/// Redraws every timestamp uniformly in its `delta`-cell
/// `[floor(t/δ)δ, floor(t/δ)δ + δ)` and re-sorts.
pub fn randomize(series: &EventSeries, delta: f64, seed: u64) -> Result<EventSeries> {
    positive("randomization width", delta)?;
    let mut rng = rng_from_seed(seed);
    let mut times: Vec<f64> = series
        .times
        .iter()
        .map(|&t| {
            let cell = grid_index_floor(t, delta) * delta;
            cell + rng.random::<f64>() * delta
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let start_cell = grid_index_floor(series.window_start, delta) * delta;
    let end_cell = grid_index_floor(series.window_end, delta) * delta + delta;
    let mut window_start = series.window_start.min(start_cell);
    let mut window_end = series.window_end.max(end_cell);
    if let (Some(&a), Some(&b)) = (times.first(), times.last()) {
        window_start = window_start.min(a);
        window_end = window_end.max(b);
    }
    Ok(EventSeries {
        times,
        window_start,
        window_end,
    })
}

/// Average intraday intensity `w(t)` on bins of equal width, starting at
/// offset 0 of each day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityProfile {
    pub bin_width: f64,
    /// Rate per bin, events per second.
    pub values: Vec<f64>,
    /// Length of the reference period; the last bin may be shorter.
    pub period: f64,
}

impl IntensityProfile {
    pub fn new(bin_width: f64, values: Vec<f64>, period: f64) -> Result<Self> {
        positive("bin width", bin_width)?;
        positive("profile period", period)?;
        if values.is_empty() || values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::param("profile values must be nonempty, finite and nonnegative"));
        }
        if (values.len() as f64) * bin_width < period * (1.0 - 1e-12) {
            return Err(Error::param(format!(
                "{} bins of width {bin_width} do not cover the period {period}",
                values.len()
            )));
        }
        Ok(IntensityProfile {
            bin_width,
            values,
            period,
        })
    }

    fn bin_of(&self, offset: f64) -> usize {
        (math::floor(offset / self.bin_width) as usize).min(self.values.len() - 1)
    }

    pub fn rate_at(&self, offset: f64) -> f64 {
        if offset < 0.0 || offset > self.period {
            return 0.0;
        }
        self.values[self.bin_of(offset)]
    }

    /// `∫_0^{offset} w`, piecewise linear.
    pub fn cumulative(&self, offset: f64) -> f64 {
        let offset = offset.clamp(0.0, self.period);
        let bin = self.bin_of(offset);
        let full: f64 = self.values[..bin].iter().sum::<f64>() * self.bin_width;
        full + self.values[bin] * (offset - bin as f64 * self.bin_width)
    }

    /// The profile as a piecewise-constant background starting at `origin`.
    pub fn to_background(&self, origin: f64) -> Result<BackgroundProfile> {
        let mut breakpoints: Vec<f64> = (0..self.values.len())
            .map(|k| origin + k as f64 * self.bin_width)
            .collect();
        breakpoints.push(origin + self.period);
        BackgroundProfile::new(breakpoints, self.values.clone())
    }
}

/// Averages binned event rates over aligned days (offsets from each day's
/// window start).
pub fn estimate_profile(days: &[EventSeries], bin_width: f64) -> Result<IntensityProfile> {
    positive("bin width", bin_width)?;
    let Some(first) = days.first() else {
        return Err(Error::InsufficientData("profile estimation needs at least one day".into()));
    };
    let period = first.duration();
    positive("day length", period)?;
    if let Some(d) = days.iter().find(|d| (d.duration() - period).abs() > 1e-9 * period) {
        return Err(Error::InvalidSeries(format!(
            "day windows are not aligned: lengths {period} and {}",
            d.duration()
        )));
    }
    let bins = math::ceil(period / bin_width - 1e-9).max(1.0) as usize;
    let mut counts = alloc::vec![0.0f64; bins];
    for day in days {
        for &t in &day.times {
            let k = (math::floor((t - day.window_start) / bin_width) as usize).min(bins - 1);
            counts[k] += 1.0;
        }
    }
    let ndays = days.len() as f64;
    let values = counts
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let width = bin_width.min(period - k as f64 * bin_width);
            c / (ndays * width)
        })
        .collect();
    IntensityProfile::new(bin_width, values, period)
}

/// Time change `t ↦ ∫_0^{t - start} w` by the cumulative profile. The output
/// window is the image `(0, ∫_0^T w]` of the input window.
pub fn detrend(series: &EventSeries, profile: &IntensityProfile) -> Result<EventSeries> {
    let duration = series.duration();
    if duration > profile.period * (1.0 + 1e-12) {
        return Err(Error::param(format!(
            "profile period {} does not cover the series window of length {duration}",
            profile.period
        )));
    }
    let mut times = Vec::with_capacity(series.len());
    for &t in &series.times {
        let offset = t - series.window_start;
        let bin = profile.bin_of(offset.max(0.0));
        if profile.values[bin] <= 0.0 {
            return Err(Error::DegenerateProfile { bin, time: t });
        }
        times.push(profile.cumulative(offset));
    }
    Ok(EventSeries {
        times,
        window_start: 0.0,
        window_end: profile.cumulative(duration),
    })
}

/// Joins series end to end: each window start is moved to the previous
/// window end plus `gap`. Empty parts still contribute their window.
pub fn concatenate(parts: &[EventSeries], gap: f64) -> Result<EventSeries> {
    if !(gap >= 0.0 && gap.is_finite()) {
        return Err(Error::param(format!("gap must be finite and >= 0, got {gap}")));
    }
    let Some(first) = parts.first() else {
        return Err(Error::InsufficientData("nothing to concatenate".into()));
    };
    let mut times = Vec::with_capacity(parts.iter().map(EventSeries::len).sum());
    let mut end = first.window_start - gap;
    for (i, part) in parts.iter().enumerate() {
        let shift = if i == 0 { 0.0 } else { end + gap - part.window_start };
        times.extend(part.times.iter().map(|t| t + shift));
        end = part.window_end + shift;
    }
    Ok(EventSeries {
        times,
        window_start: first.window_start,
        window_end: end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(times: &[f64], start: f64, end: f64) -> EventSeries {
        EventSeries::new(times.to_vec(), start, end).unwrap()
    }

    #[test]
    fn outliers_rebuild_by_cumulative_sum() {
        let base = s(&[1.0, 2.0, 4.0, 14.0], 0.0, 15.0);
        assert_eq!(inject_outliers(&base, 0.0, 2.0, 1).unwrap(), base);
        // one of three durations {1, 2, 10} becomes 20
        let out = inject_outliers(&base, 1.0 / 3.0, 2.0, 9).unwrap();
        let d = out.durations();
        assert_eq!(d.iter().filter(|&&x| x == 20.0).count(), 1);
        assert_eq!(out.len(), base.len());
        assert_eq!(out.times[0], 1.0);
        let added = out.times[3] - base.times[3];
        assert_eq!(out.window_end, 15.0 + added);
    }

    #[test]
    fn bundle_right_and_left() {
        let base = s(&[0.1, 0.4, 1.2], 0.0, 2.0);
        assert_eq!(bundle(&base, 1.0, BundleEdge::Right).unwrap().times, vec![1.0, 1.0, 2.0]);
        assert_eq!(bundle(&base, 1.0, BundleEdge::Left).unwrap().times, vec![0.0, 0.0, 1.0]);
        assert!(bundle(&base, 0.0, BundleEdge::Right).is_err());
        let fine = bundle(&base, 0.01, BundleEdge::Right).unwrap();
        assert!(fine.first_tie().is_none());
        for (a, b) in fine.times.iter().zip(&base.times) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn randomize_stays_in_cells() {
        let base = s(&[1.0, 1.0, 1.0, 3.0], 0.0, 3.0);
        let r = randomize(&base, 1.0, 4).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.times[..3].iter().all(|&t| (1.0..2.0).contains(&t)));
        assert!((3.0..4.0).contains(&r.times[3]));
        assert_eq!(r.window_end, 4.0);
        assert!(r.times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn detrend_constant_profiles() {
        let base = s(&[0.5, 2.0, 9.0], 0.0, 10.0);
        let unit = IntensityProfile::new(5.0, vec![1.0, 1.0], 10.0).unwrap();
        assert_eq!(detrend(&base, &unit).unwrap(), base);
        let triple = IntensityProfile::new(5.0, vec![3.0, 3.0], 10.0).unwrap();
        let d = detrend(&base, &triple).unwrap();
        assert_eq!(d.times, vec![1.5, 6.0, 27.0]);
        assert_eq!(d.window_end, 30.0);
        let holey = IntensityProfile::new(5.0, vec![1.0, 0.0], 10.0).unwrap();
        assert!(matches!(detrend(&base, &holey), Err(Error::DegenerateProfile { bin: 1, .. })));
    }

    #[test]
    fn estimate_profile_single_and_repeated_days() {
        let day = s(&[1.0, 2.0, 7.0], 0.0, 10.0);
        let p = estimate_profile(core::slice::from_ref(&day), 10.0).unwrap();
        assert_eq!(p.values, vec![0.3]);
        let p2 = estimate_profile(&[day.clone(), day.shifted(100.0)], 5.0).unwrap();
        assert_eq!(p2.values, vec![0.4, 0.2]);
    }

    #[test]
    fn concatenate_offsets() {
        let a = s(&[1.0, 3.0], 0.0, 4.0);
        assert_eq!(concatenate(core::slice::from_ref(&a), 0.0).unwrap(), a);
        let c = concatenate(&[a.clone(), a.clone()], 0.0).unwrap();
        assert_eq!(c.times, vec![1.0, 3.0, 5.0, 7.0]);
        assert_eq!((c.window_start, c.window_end), (0.0, 8.0));
        let g = concatenate(&[a.clone(), a], 1.0).unwrap();
        assert_eq!(g.times[2], 6.0);
        let quiet = concatenate(&[s(&[], 0.0, 1.0), s(&[0.5], 0.0, 1.0)], 0.0).unwrap();
        assert_eq!(quiet.times, vec![1.5]);
        assert_eq!(quiet.window_end, 2.0);
        assert!(concatenate(&[], 0.0).is_err());
    }
}
