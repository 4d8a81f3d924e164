//! Independent reference implementations used as test oracles.
//!
//! Everything here is deliberately naive: adaptive Gauss–Kronrod quadrature
//! instead of closed forms, `O(N²)` sums instead of recursions.

use hawkes_core::{EventSeries, Kernel};

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 7/15-point Gauss–Kronrod panel: (Kronrod estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * GAUSS_WEIGHTS[3];
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let pair = f(c - x) + f(c + x);
        kronrod += GK_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, whole: (f64, f64), depth: u32) -> f64 {
        let (value, err) = whole;
        if err <= tol || depth > 60 || (b - a) <= 1e-15 * a.abs().max(b.abs()) {
            return value;
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        recurse(f, a, m, 0.5 * tol, left, depth + 1) + recurse(f, m, b, 0.5 * tol, right, depth + 1)
    }
    let whole = gk15(&f, a, b);
    recurse(&f, a, b, tol, whole, 0)
}

/// `∫_a^b f` for `0 < a < b` spanning many decades, via `t = e^x`.
pub fn integrate_log<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    assert!(a > 0.0 && b > a);
    integrate(|x: f64| {
        let t = x.exp();
        f(t) * t
    }, a.ln(), b.ln(), tol)
}

/// `∫_0^T h` by quadrature: linear panels on `[0, t_lo]`, log panels beyond.
pub fn kernel_mass(kernel: &Kernel, horizon: f64, tol: f64) -> f64 {
    let t_lo = (kernel.min_time_scale() * 1e-3).min(horizon);
    let near = integrate(|t| kernel.evaluate(t), 0.0, t_lo, tol * 1e-3);
    if horizon <= t_lo {
        return near;
    }
    let mut total = near;
    // split at the cut-off (if any) and every decade so no panel straddles a kink
    let mut a = t_lo;
    while a < horizon {
        let b = (a * 10.0).min(horizon);
        total += integrate_log(|t| kernel.evaluate(t), a, b, tol * 1e-2);
        a = b;
    }
    total
}

/// `H2_i = Σ_{t_j < t_i} h(t_i - t_j)` by brute force.
pub fn h2_brute(times: &[f64], kernel: &Kernel) -> Vec<f64> {
    times
        .iter()
        .map(|&t| times.iter().filter(|&&s| s < t).map(|&s| kernel.evaluate(t - s)).sum())
        .collect()
}

/// `H1 = Σ_i ∫_0^{T - t_i} h` by brute force over the closed-form integral.
pub fn h1_brute(series: &EventSeries, kernel: &Kernel) -> f64 {
    series
        .times
        .iter()
        .map(|&t| kernel.integral(series.window_end - t).unwrap())
        .sum()
}

/// `O(N²)` log-likelihood.
pub fn log_likelihood_brute(series: &EventSeries, mu: f64, n: f64, kernel: &Kernel) -> f64 {
    let h2 = h2_brute(&series.times, kernel);
    let sum: f64 = h2.iter().map(|h| (mu + n * h).ln()).sum();
    -mu * series.duration() - n * h1_brute(series, kernel) + sum
}

/// `O(N²)` residuals `ξ_i = μ (t_i - start) + n Σ_{t_j < t_i} ∫_0^{t_i - t_j} h`.
pub fn residuals_brute(series: &EventSeries, mu: f64, n: f64, kernel: &Kernel) -> Vec<f64> {
    series
        .times
        .iter()
        .map(|&t| {
            let excited: f64 = series
                .times
                .iter()
                .filter(|&&s| s < t)
                .map(|&s| kernel.cdf(t - s))
                .sum();
            mu * (t - series.window_start) + n * excited
        })
        .collect()
}

/// Central finite difference with step `h`.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Fourth-order central difference, accurate enough for `1e-5` relative checks.
pub fn central_difference4<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn std_err(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Kolmogorov tail by the plain alternating series (no small-λ switch).
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let sign = if k as i64 % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * (-2.0 * k * k * lambda * lambda).exp();
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test: `(D, asymptotic p-value)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = d * (ne.sqrt() + 0.12 + 0.11 / ne.sqrt());
    (d, kolmogorov_tail(lambda))
}

/// One-sample KS test of `xs` against the CDF `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> (f64, f64) {
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let lambda = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    (d, kolmogorov_tail(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_basics() {
        let v = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate_log(|t| 1.0 / (t * t), 1e-3, 1e6, 1e-10);
        assert!((v - (1e3 - 1e-6)).abs() < 1e-7);
    }

    #[test]
    fn two_sample_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let (d, p) = ks_two_sample(&a, &a);
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
    }
}
