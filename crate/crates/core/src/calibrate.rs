//! Maximum-likelihood calibration with the background rate eliminated.
//!
//! For fixed kernel parameters `ψ` the optimal `(μ, n)` satisfy
//! `μT + nH1(ψ) = N`. Substituting `μ = (N - nH1)/T` leaves the convex
//! one-dimensional profile
//!
//! ```text
//! g(n) = N - Σ_i ln(N/T + n (H2_i - H1/T))
//! ```
//!
//! whose minimum over `n` is the cost `S(ψ)`, equal to the minimum of
//! `-log L` over `(μ, n)`. The outer problem minimizes `S` over `ψ` with a
//! bounded simplex search started from a log-spaced grid.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{ExpTerm, Kernel, KernelSpec, DEFAULT_RATIO, DEFAULT_TERMS};
use crate::math;
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::series::EventSeries;

/// Below this many events the power-law `H2` is summed directly.
const DIRECT_LIMIT: usize = 2048;

/// Relative shrink of the admissible upper bound on `n`.
const N_MAX_MARGIN: f64 = 1e-9;

/// Hard ceiling of the `n` search interval (supercritical fits allowed).
pub const N_CEILING: f64 = 2.0;

/// Kernel excitation integrals of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct Excitation {
    /// `H1 = Σ_i ∫_0^{T - t_i} h`.
    pub h1: f64,
    /// `H2_i = Σ_{t_j < t_i} h(t_i - t_j)`.
    pub h2: Vec<f64>,
}

/// `H1` and `H2` for the given kernel.
///
/// Exponential and sum-of-exponentials kernels use the exact `O(N·terms)`
/// recursion. The Omori law is summed directly for small series and through
/// its exponential-sum quadrature (relative error below `1e-9`) otherwise;
/// the cut-off law is always summed directly. Tied timestamps do not excite
/// each other.
pub fn h1_h2(series: &EventSeries, kernel: &Kernel) -> Excitation {
    let end = series.window_end;
    let closed_form_h1 = || series.times.iter().map(|&t| kernel.cdf(end - t)).sum();
    match kernel.spec() {
        KernelSpec::Exponential { .. } | KernelSpec::ApproxPowerLaw { .. } => {
            let terms = kernel.expansion(0.0).expect("exact expansion").terms;
            let (h2, state) = recursive_h2(&series.times, &terms, end);
            // Σ_i ∫_{T - t_i}^∞ h = Σ_k (w_k / r_k) A_k(T)
            let tail: f64 = state.iter().zip(&terms).map(|(a, e)| e.weight / e.rate * a).sum();
            Excitation {
                h1: series.len() as f64 - tail,
                h2,
            }
        }
        KernelSpec::Omori { .. } if series.len() > DIRECT_LIMIT => {
            let terms = kernel.expansion(series.duration()).expect("quadrature expansion").terms;
            Excitation {
                h1: closed_form_h1(),
                h2: recursive_h2(&series.times, &terms, end).0,
            }
        }
        _ => Excitation {
            h1: closed_form_h1(),
            h2: direct_h2(&series.times, kernel),
        },
    }
}

/// Runs the exponential-state recursion; also returns the states at `end`
/// with every event included.
fn recursive_h2(times: &[f64], terms: &[ExpTerm], end: f64) -> (Vec<f64>, Vec<f64>) {
    let mut state = vec![0.0; terms.len()];
    let mut h2 = Vec::with_capacity(times.len());
    let mut prev = f64::NAN;
    // events sitting at `prev` that are not yet folded into the state
    let mut pending = 0.0;
    for &t in times {
        if t == prev {
            pending += 1.0;
            h2.push(*h2.last().unwrap());
            continue;
        }
        let mut value = 0.0;
        if pending > 0.0 {
            let dt = t - prev;
            for (a, e) in state.iter_mut().zip(terms) {
                *a = math::exp(-e.rate * dt) * (*a + pending);
                value += e.weight * *a;
            }
        }
        h2.push(value);
        prev = t;
        pending = 1.0;
    }
    if pending > 0.0 {
        let dt = end - prev;
        for (a, e) in state.iter_mut().zip(terms) {
            *a = math::exp(-e.rate * dt) * (*a + pending);
        }
    }
    (h2, state)
}

fn direct_h2(times: &[f64], kernel: &Kernel) -> Vec<f64> {
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let strict = times[..i].partition_point(|&s| s < t);
            times[..strict].iter().map(|&s| kernel.evaluate(t - s)).sum()
        })
        .collect()
}

/// Discrete log-likelihood `-μT - nH1 + Σ ln(μ + nH2_i)`.
pub fn log_likelihood(series: &EventSeries, mu: f64, n: f64, kernel: &Kernel) -> Result<f64> {
    let ex = h1_h2(series, kernel);
    log_likelihood_from(series, mu, n, &ex)
}

/// [`log_likelihood`] with precomputed excitation integrals.
pub fn log_likelihood_from(series: &EventSeries, mu: f64, n: f64, ex: &Excitation) -> Result<f64> {
    let mut sum = 0.0;
    for (i, &h2) in ex.h2.iter().enumerate() {
        let lambda = mu + n * h2;
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveIntensity {
                index: i,
                time: series.times[i],
            });
        }
        sum += math::ln(lambda);
    }
    Ok(-mu * series.duration() - n * ex.h1 + sum)
}

/// Analytic gradient `(∂/∂μ, ∂/∂n)` of the log-likelihood.
pub fn gradient(series: &EventSeries, mu: f64, n: f64, kernel: &Kernel) -> Result<(f64, f64)> {
    let ex = h1_h2(series, kernel);
    let mut d_mu = -series.duration();
    let mut d_n = -ex.h1;
    for (i, &h2) in ex.h2.iter().enumerate() {
        let lambda = mu + n * h2;
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveIntensity {
                index: i,
                time: series.times[i],
            });
        }
        d_mu += 1.0 / lambda;
        d_n += h2 / lambda;
    }
    Ok((d_mu, d_n))
}

/// Minimum of the profiled cost at fixed kernel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileCost {
    /// `S(ψ) = min_{μ,n} -log L`.
    pub value: f64,
    pub mu_star: f64,
    pub n_star: f64,
    /// Upper end of the admissible interval for `n`.
    pub n_max: f64,
    pub h1: f64,
}

/// Profiles out `(μ, n)` for a fixed kernel.
pub fn profile_cost(series: &EventSeries, kernel: &Kernel) -> Result<ProfileCost> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "profile cost needs at least 3 events, got {}",
            series.len()
        )));
    }
    let ex = h1_h2(series, kernel);
    profile_from(series, &ex)
}

/// [`profile_cost`] with precomputed excitation integrals.
pub fn profile_from(series: &EventSeries, ex: &Excitation) -> Result<ProfileCost> {
    let count = series.len() as f64;
    let duration = series.duration();
    if !(duration > 0.0) {
        return Err(Error::InsufficientData("observation window has zero length".into()));
    }
    let a = count / duration;
    let b: Vec<f64> = ex.h2.iter().map(|h2| h2 - ex.h1 / duration).collect();

    let mut n_max = N_CEILING;
    if ex.h1 > 0.0 {
        n_max = n_max.min(count / ex.h1 * (1.0 - N_MAX_MARGIN));
    }
    for &bi in &b {
        if bi < 0.0 {
            n_max = n_max.min(-a / bi * (1.0 - N_MAX_MARGIN));
        }
    }

    let slope = |n: f64| -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for &bi in &b {
            let r = bi / (a + n * bi);
            d1 -= r;
            d2 += r * r;
        }
        (d1, d2)
    };

    let n_star = if slope(0.0).0 >= 0.0 {
        0.0
    } else if slope(n_max).0 <= 0.0 {
        n_max
    } else {
        // g' is increasing: safeguarded Newton inside a shrinking bracket
        let (mut lo, mut hi) = (0.0, n_max);
        let mut n = 0.5 * n_max;
        for _ in 0..200 {
            let (d1, d2) = slope(n);
            if d1 > 0.0 {
                hi = n;
            } else {
                lo = n;
            }
            let newton = n - d1 / d2;
            let next = if d2 > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let done = (next - n).abs() <= 1e-13 * next.max(1e-3) || hi - lo <= 1e-15;
            n = next;
            if done {
                break;
            }
        }
        n
    };

    let value = count - b.iter().map(|bi| math::ln(a + n_star * bi)).sum::<f64>();
    Ok(ProfileCost {
        value,
        mu_star: (count - n_star * ex.h1) / duration,
        n_star,
        n_max,
        h1: ex.h1,
    })
}

/// Kernel family searched by [`fit`], parametrized in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    Exponential,
    Omori,
    ApproxPowerLaw {
        #[serde(rename = "M", default = "default_terms")]
        terms: usize,
        #[serde(rename = "m", default = "default_ratio")]
        ratio: f64,
    },
}

fn default_terms() -> usize {
    DEFAULT_TERMS
}

fn default_ratio() -> f64 {
    DEFAULT_RATIO
}

impl KernelFamily {
    pub fn approx_power_law() -> Self {
        KernelFamily::ApproxPowerLaw {
            terms: DEFAULT_TERMS,
            ratio: DEFAULT_RATIO,
        }
    }

    /// Number of kernel parameters.
    pub fn dimension(&self) -> usize {
        match self {
            KernelFamily::Exponential => 1,
            _ => 2,
        }
    }

    /// Kernel with the given natural parameters `(time-scale[, exponent])`.
    pub fn spec(&self, params: &[f64]) -> KernelSpec {
        match *self {
            KernelFamily::Exponential => KernelSpec::Exponential { tau: params[0] },
            KernelFamily::Omori => KernelSpec::Omori {
                c: params[0],
                theta: params[1],
            },
            KernelFamily::ApproxPowerLaw { terms, ratio } => KernelSpec::ApproxPowerLaw {
                tau0: params[0],
                epsilon: params[1],
                terms,
                ratio,
            },
        }
    }

    /// Natural parameters of a spec belonging to this family.
    pub fn params_of(&self, spec: &KernelSpec) -> Option<Vec<f64>> {
        match (self, spec) {
            (KernelFamily::Exponential, KernelSpec::Exponential { tau }) => Some(vec![*tau]),
            (KernelFamily::Omori, KernelSpec::Omori { c, theta }) => Some(vec![*c, *theta]),
            (KernelFamily::ApproxPowerLaw { .. }, KernelSpec::ApproxPowerLaw { tau0, epsilon, .. }) => {
                Some(vec![*tau0, *epsilon])
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Exponential => "exponential",
            KernelFamily::Omori => "omori",
            KernelFamily::ApproxPowerLaw { .. } => "approx_power_law",
        }
    }
}

/// Multi-start search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStartConfig {
    /// Grid points along the time-scale and exponent axes.
    pub grid: (usize, usize),
    pub time_scale_bounds: (f64, f64),
    pub exponent_bounds: (f64, f64),
    pub max_iter: usize,
    /// Simplex diameter tolerance in log-parameter space.
    pub xtol: f64,
    /// When set, every grid start is scored first and only the best `k` are refined.
    pub refine_best: Option<usize>,
}

impl Default for MultiStartConfig {
    fn default() -> Self {
        MultiStartConfig {
            grid: (5, 5),
            time_scale_bounds: (1e-4, 1e2),
            exponent_bounds: (0.05, 5.0),
            max_iter: 500,
            xtol: 1e-6,
            refine_best: None,
        }
    }
}

impl MultiStartConfig {
    fn lower_upper(&self, family: &KernelFamily) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![math::ln(self.time_scale_bounds.0)];
        let mut hi = vec![math::ln(self.time_scale_bounds.1)];
        if family.dimension() == 2 {
            lo.push(math::ln(self.exponent_bounds.0));
            hi.push(math::ln(self.exponent_bounds.1));
        }
        (lo, hi)
    }

    /// Start points (natural parameters) at the centers of a log-spaced grid.
    pub fn start_points(&self, family: &KernelFamily) -> Vec<Vec<f64>> {
        let axis = |(lo, hi): (f64, f64), count: usize| -> Vec<f64> {
            let (a, b) = (math::ln(lo), math::ln(hi));
            (0..count)
                .map(|k| math::exp(a + (k as f64 + 0.5) / count as f64 * (b - a)))
                .collect()
        };
        let times = axis(self.time_scale_bounds, self.grid.0.max(1));
        if family.dimension() == 1 {
            return times.into_iter().map(|t| vec![t]).collect();
        }
        let exps = axis(self.exponent_bounds, self.grid.1.max(1));
        times
            .iter()
            .flat_map(|&t| exps.iter().map(move |&e| vec![t, e]))
            .collect()
    }

    fn options(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            max_iter: self.max_iter,
            xtol: self.xtol,
            ..NelderMeadOptions::default()
        }
    }
}

/// Outcome of one local search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub start: Vec<f64>,
    pub params: Vec<f64>,
    /// Attained cost, `None` when no admissible point was found.
    pub value: Option<f64>,
    pub mu: f64,
    pub n: f64,
    pub converged: bool,
    /// Whether a simplex search was run from this start.
    pub refined: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Calibrated model together with the multi-start provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mu_hat: f64,
    pub n_hat: f64,
    pub kernel: KernelSpec,
    pub neg_log_lik: f64,
    pub n_events: usize,
    pub window: (f64, f64),
    pub h1: f64,
    pub starts: Vec<StartRecord>,
    pub best_start_index: usize,
}

impl FitResult {
    /// `|μ̂T + n̂H1 - N| / N`; zero up to rounding by construction.
    pub fn stationarity_residual(&self) -> f64 {
        let duration = self.window.1 - self.window.0;
        let n = self.n_events as f64;
        (self.mu_hat * duration + self.n_hat * self.h1 - n).abs() / n
    }
}

fn cost_at(series: &EventSeries, family: &KernelFamily, params: &[f64]) -> Option<ProfileCost> {
    let kernel = family.spec(params).build().ok()?;
    profile_cost(series, &kernel).ok().filter(|p| p.value.is_finite())
}

/// Scores a start point without searching.
pub fn score_start(series: &EventSeries, family: &KernelFamily, start: &[f64]) -> StartRecord {
    let cost = cost_at(series, family, start);
    StartRecord {
        start: start.to_vec(),
        params: start.to_vec(),
        value: cost.map(|c| c.value),
        mu: cost.map_or(f64::NAN, |c| c.mu_star),
        n: cost.map_or(f64::NAN, |c| c.n_star),
        converged: false,
        refined: false,
        iterations: 0,
        evaluations: 1,
    }
}

/// Simplex search of `S(ψ)` in log-parameter space from one start.
pub fn local_fit(series: &EventSeries, family: &KernelFamily, config: &MultiStartConfig, start: &[f64]) -> StartRecord {
    let (lower, upper) = config.lower_upper(family);
    let x0: Vec<f64> = start.iter().map(|&p| math::ln(p)).collect();
    let natural = |x: &[f64]| -> Vec<f64> { x.iter().map(|&v| math::exp(v)).collect() };
    let found = nelder_mead::minimize(
        |x| cost_at(series, family, &natural(x)).map_or(f64::INFINITY, |c| c.value),
        &x0,
        &lower,
        &upper,
        &config.options(),
    );
    let params = natural(&found.x);
    let cost = cost_at(series, family, &params);
    StartRecord {
        start: start.to_vec(),
        params,
        value: cost.map(|c| c.value),
        mu: cost.map_or(f64::NAN, |c| c.mu_star),
        n: cost.map_or(f64::NAN, |c| c.n_star),
        converged: found.converged,
        refined: true,
        iterations: found.iterations,
        evaluations: found.evaluations,
    }
}

/// Indices of the starts to refine under `config.refine_best`, best first.
pub fn select_for_refinement(scored: &[StartRecord], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].value.is_some()).collect();
    order.sort_by(|&i, &j| scored[i].value.unwrap().total_cmp(&scored[j].value.unwrap()).then(i.cmp(&j)));
    order.truncate(keep);
    order
}

fn check_fit_input(series: &EventSeries) -> Result<()> {
    if series.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "calibration needs at least 10 events, got {}",
            series.len()
        )));
    }
    Ok(())
}

/// Multi-start maximum-likelihood fit of `(μ, n, ψ)`.
pub fn fit(series: &EventSeries, family: &KernelFamily, config: &MultiStartConfig) -> Result<FitResult> {
    check_fit_input(series)?;
    let starts = config.start_points(family);
    let records = match config.refine_best {
        None => starts.iter().map(|s| local_fit(series, family, config, s)).collect(),
        Some(keep) => {
            let mut records: Vec<StartRecord> = starts.iter().map(|s| score_start(series, family, s)).collect();
            for i in select_for_refinement(&records, keep) {
                records[i] = local_fit(series, family, config, &starts[i]);
            }
            records
        }
    };
    assemble(series, family, records)
}

/// Picks the best start (lowest cost, ties to the smaller `n`) and builds the result.
pub fn assemble(series: &EventSeries, family: &KernelFamily, starts: Vec<StartRecord>) -> Result<FitResult> {
    check_fit_input(series)?;
    let best = starts
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.value.map(|v| (i, v, r.n)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)))
        .map(|(i, _, _)| i);
    let Some(best) = best else {
        let mut msg = String::from("no admissible start among ");
        msg.push_str(&format!("{} for the {} family", starts.len(), family.name()));
        return Err(Error::FitFailure(msg));
    };
    let spec = family.spec(&starts[best].params);
    let kernel = spec.build()?;
    let cost = profile_cost(series, &kernel)?;
    Ok(FitResult {
        mu_hat: cost.mu_star,
        n_hat: cost.n_star,
        kernel: spec,
        neg_log_lik: cost.value,
        n_events: series.len(),
        window: (series.window_start, series.window_end),
        h1: cost.h1,
        starts,
        best_start_index: best,
    })
}

/// One log-spaced axis of a cost surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.lo];
        }
        let (a, b) = (math::ln(self.lo), math::ln(self.hi));
        (0..self.count)
            .map(|k| math::exp(a + k as f64 / (self.count - 1) as f64 * (b - a)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceNode {
    pub psi1: f64,
    pub psi2: f64,
    /// `None` marks an inadmissible node.
    pub value: Option<f64>,
    pub mu_star: f64,
    pub n_star: f64,
}

/// Profile cost on a grid over `(time-scale, exponent)`, row-major in the time-scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSurface {
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
    pub nodes: Vec<SurfaceNode>,
}

impl CostSurface {
    pub fn node(&self, i: usize, j: usize) -> &SurfaceNode {
        &self.nodes[i * self.psi2.len() + j]
    }

    /// Grid index of the smallest admissible value.
    pub fn global_minimum(&self) -> Option<(usize, usize)> {
        let cols = self.psi2.len();
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(k, n)| n.value.map(|v| (k, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| (k / cols, k % cols))
    }

    /// Admissible nodes strictly below all admissible neighbours (8-connectivity).
    pub fn local_minima(&self) -> Vec<(usize, usize)> {
        let (rows, cols) = (self.psi1.len(), self.psi2.len());
        let mut out = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                let Some(v) = self.node(i, j).value else { continue };
                let mut is_min = true;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        let (ni, nj) = (i as i64 + di, j as i64 + dj);
                        if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= rows as i64 || nj >= cols as i64 {
                            continue;
                        }
                        if let Some(w) = self.node(ni as usize, nj as usize).value {
                            if w <= v {
                                is_min = false;
                            }
                        }
                    }
                }
                if is_min {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Evaluates one node of a cost surface.
pub fn surface_node(series: &EventSeries, family: &KernelFamily, psi1: f64, psi2: f64) -> SurfaceNode {
    let cost = cost_at(series, family, &[psi1, psi2]);
    SurfaceNode {
        psi1,
        psi2,
        value: cost.map(|c| c.value),
        mu_star: cost.map_or(f64::NAN, |c| c.mu_star),
        n_star: cost.map_or(f64::NAN, |c| c.n_star),
    }
}

/// Profile cost at every node of a `time-scale × exponent` grid.
pub fn cost_surface(series: &EventSeries, family: &KernelFamily, axis1: Axis, axis2: Axis) -> Result<CostSurface> {
    if family.dimension() != 2 {
        return Err(Error::param("cost surfaces need a two-parameter kernel family"));
    }
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "cost surface needs at least 3 events, got {}",
            series.len()
        )));
    }
    let psi1 = axis1.values();
    let psi2 = axis2.values();
    let nodes = psi1
        .iter()
        .flat_map(|&a| psi2.iter().map(move |&b| (a, b)))
        .map(|(a, b)| surface_node(series, family, a, b))
        .collect();
    Ok(CostSurface { psi1, psi2, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(times: &[f64], end: f64) -> EventSeries {
        EventSeries::new(times.to_vec(), 0.0, end).unwrap()
    }

    #[test]
    fn single_event_exponential() {
        let k = KernelSpec::Exponential { tau: 2.0 }.build().unwrap();
        let s = series(&[3.0], 10.0);
        let ex = h1_h2(&s, &k);
        assert!((ex.h1 - (1.0 - (-3.5f64).exp())).abs() < 1e-15);
        assert_eq!(ex.h2, vec![0.0]);
    }

    #[test]
    fn omori_three_events_by_hand() {
        let k = KernelSpec::Omori { c: 1.0, theta: 0.5 }.build().unwrap();
        let h = |t: f64| 0.5 * (t + 1.0f64).powf(-1.5);
        let s = series(&[1.0, 2.0, 4.0], 5.0);
        let ex = h1_h2(&s, &k);
        let want = [0.0, h(1.0), h(3.0) + h(2.0)];
        for (g, w) in ex.h2.iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn ties_use_strict_predecessors() {
        let k = KernelSpec::Exponential { tau: 1.0 }.build().unwrap();
        let s = series(&[1.0, 2.0, 2.0, 3.0], 4.0);
        let ex = h1_h2(&s, &k);
        let e = |t: f64| (-t).exp();
        assert!((ex.h2[1] - e(1.0)).abs() < 1e-15);
        assert_eq!(ex.h2[1], ex.h2[2]);
        assert!((ex.h2[3] - (e(2.0) + 2.0 * e(1.0))).abs() < 1e-15);
        assert_eq!(direct_h2(&s.times, &k)[2], ex.h2[2]);
    }

    #[test]
    fn poisson_limit_of_likelihood() {
        let k = KernelSpec::Exponential { tau: 1.0 }.build().unwrap();
        let s = series(&[1.0, 2.5, 4.0, 7.0], 10.0);
        let mu = 0.4;
        let ll = log_likelihood(&s, mu, 0.0, &k).unwrap();
        assert!((ll - (-mu * 10.0 + 4.0 * mu.ln())).abs() < 1e-14);
        assert!(matches!(
            log_likelihood(&s, 0.0, 0.5, &k),
            Err(Error::NonPositiveIntensity { index: 0, .. })
        ));
    }

    #[test]
    fn profile_rejects_tiny_series() {
        let k = KernelSpec::Exponential { tau: 1.0 }.build().unwrap();
        assert!(matches!(
            profile_cost(&series(&[1.0, 2.0], 3.0), &k),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn start_grid_is_cell_centered() {
        let cfg = MultiStartConfig::default();
        let pts = cfg.start_points(&KernelFamily::Omori);
        assert_eq!(pts.len(), 25);
        // first time-scale center: 10^{-4 + 0.6}
        assert!((pts[0][0] - 10f64.powf(-3.4)).abs() < 1e-15);
        assert_eq!(cfg.start_points(&KernelFamily::Exponential).len(), 5);
    }

    #[test]
    fn local_minima_of_a_two_valley_grid() {
        let psi1 = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let psi2 = vec![1.0, 2.0, 3.0];
        let values = [
            [5.0, 4.0, 5.0],
            [4.0, 1.0, 4.0],
            [5.0, 4.0, 5.0],
            [4.0, 2.0, 4.0],
            [5.0, 4.0, 5.0],
        ];
        let nodes = values
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter().enumerate().map(move |(j, &v)| SurfaceNode {
                    psi1: (i + 1) as f64,
                    psi2: (j + 1) as f64,
                    value: Some(v),
                    mu_star: 0.0,
                    n_star: 0.0,
                })
            })
            .collect();
        let s = CostSurface { psi1, psi2, nodes };
        assert_eq!(s.local_minima(), vec![(1, 1), (3, 1)]);
        assert_eq!(s.global_minimum(), Some((1, 1)));
    }
}
