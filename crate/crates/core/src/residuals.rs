//! Time-rescaling residuals and the goodness-of-fit tests applied to them.
//!
//! Under the true model the compensator `ξ_i = ∫ λ` evaluated at the event
//! times is a unit-rate Poisson process, so `U_i = 1 - e^{-(ξ_i - ξ_{i-1})}`
//! are i.i.d. uniform.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelSpec};
use crate::math;
use crate::series::{EventSeries, HawkesParams};
use crate::special;

const DIRECT_LIMIT: usize = 2048;

/// Compensator increments `∫_{t_{i-1}}^{t_i} λ`, with `t_0` the window start.
fn compensator_increments(series: &EventSeries, params: &HawkesParams, kernel: &Kernel) -> Vec<f64> {
    let times = &series.times;
    let mut out = Vec::with_capacity(times.len());
    let mut prev = series.window_start;
    let expansion = match kernel.spec() {
        KernelSpec::Omori { .. } if times.len() <= DIRECT_LIMIT => None,
        _ => kernel.expansion(series.duration()),
    };
    match expansion {
        Some(e) => {
            // A_k holds Σ_{t_j <= prev} e^{-r_k (prev - t_j)}
            let mut state = vec![0.0; e.terms.len()];
            for &t in times {
                let dt = t - prev;
                let mut excited = 0.0;
                for (a, term) in state.iter_mut().zip(&e.terms) {
                    if *a != 0.0 {
                        excited += term.weight / term.rate * *a * -math::exp_m1(-term.rate * dt);
                    }
                    *a = *a * math::exp(-term.rate * dt) + 1.0;
                }
                out.push(params.mu.integral(prev, t) + params.n * excited);
                prev = t;
            }
        }
        None => {
            for (i, &t) in times.iter().enumerate() {
                let excited: f64 = times[..i]
                    .iter()
                    .map(|&s| kernel.survival(prev - s) - kernel.survival(t - s))
                    .sum();
                out.push(params.mu.integral(prev, t) + params.n * excited);
                prev = t;
            }
        }
    }
    out
}

/// Residual times `ξ_i = ∫_{window start}^{t_i} λ(s) ds`.
pub fn residual_transform(series: &EventSeries, params: &HawkesParams) -> Result<Vec<f64>> {
    params.validate()?;
    let kernel = params.kernel.build()?;
    let mut acc = 0.0;
    Ok(compensator_increments(series, params, &kernel)
        .into_iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect())
}

/// `U_i = 1 - exp(-(ξ_i - ξ_{i-1}))` for consecutive residuals.
pub fn uniformize(xi: &[f64]) -> Vec<f64> {
    xi.windows(2)
        .map(|w| (-math::exp_m1(-(w[1] - w[0]))).clamp(0.0, 1.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against `Uniform[0, 1]` with the
/// asymptotic Kolmogorov p-value and Stephens' small-sample correction.
pub fn ks_uniform_test(u: &[f64]) -> Result<TestOutcome> {
    if u.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "KS test needs at least 10 values, got {}",
            u.len()
        )));
    }
    let mut sorted = u.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let sqrt_n = math::sqrt(n);
    let lambda = d * (sqrt_n + 0.12 + 0.11 / sqrt_n);
    Ok(TestOutcome {
        statistic: d,
        p_value: special::kolmogorov_q(lambda),
    })
}

/// Conventional lag count `min(20, n/10)`, at least one.
pub fn default_lags(n: usize) -> usize {
    (n / 10).clamp(1, 20)
}

/// Ljung–Box portmanteau test `Q = n(n+2) Σ_{k=1}^{h} ρ̂_k² / (n - k)` with a
/// `χ²(h)` p-value.
pub fn ljung_box_test(u: &[f64], lags: usize) -> Result<TestOutcome> {
    let len = u.len();
    if lags == 0 || len <= lags {
        return Err(Error::InsufficientData(format!(
            "Ljung-Box needs more values ({len}) than lags ({lags}) and at least one lag"
        )));
    }
    let n = len as f64;
    let mean = u.iter().sum::<f64>() / n;
    let centered: Vec<f64> = u.iter().map(|x| x - mean).collect();
    let c0: f64 = centered.iter().map(|x| x * x).sum();
    if !(c0 > 0.0) || c0 <= 1e-28 * n * (mean * mean).max(1.0) {
        return Err(Error::domain("Ljung-Box autocorrelations undefined for a constant sequence"));
    }
    let q = (1..=lags)
        .map(|k| {
            let ck: f64 = centered[k..].iter().zip(&centered).map(|(a, b)| a * b).sum();
            let rho = ck / c0;
            rho * rho / (n - k as f64)
        })
        .sum::<f64>()
        * n
        * (n + 2.0);
    Ok(TestOutcome {
        statistic: q,
        p_value: special::chi_squared_sf(q, lags as f64),
    })
}

/// Residual series with both test outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub xi: Vec<f64>,
    pub u: Vec<f64>,
    pub ks_stat: f64,
    pub ks_pvalue: f64,
    pub lb_stat: f64,
    pub lb_pvalue: f64,
    pub lb_lags: usize,
}

impl ResidualReport {
    /// True when neither test rejects at level `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.ks_pvalue >= alpha && self.lb_pvalue >= alpha
    }
}

/// Full pipeline: transform, uniformize, KS and Ljung–Box.
pub fn residual_report(series: &EventSeries, params: &HawkesParams, lags: Option<usize>) -> Result<ResidualReport> {
    let xi = residual_transform(series, params)?;
    let u = uniformize(&xi);
    let lags = lags.unwrap_or_else(|| default_lags(u.len()));
    let ks = ks_uniform_test(&u)?;
    let lb = ljung_box_test(&u, lags)?;
    Ok(ResidualReport {
        xi,
        u,
        ks_stat: ks.statistic,
        ks_pvalue: ks.p_value,
        lb_stat: lb.statistic,
        lb_pvalue: lb.p_value,
        lb_lags: lags,
    })
}
