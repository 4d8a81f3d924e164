use hawkes_core::residuals::{
    default_lags, ks_uniform_test, ljung_box_test, residual_report, residual_transform, uniformize,
};
use hawkes_core::simulate::{burn, rng_from_seed, simulate_branching, DEFAULT_CAP};
use hawkes_core::special::{chi_squared_sf, gamma_p, gamma_q, kolmogorov_q};
use hawkes_core::{BackgroundProfile, EventSeries, HawkesParams, KernelSpec};
use hawkes_testkit as tk;
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn uniforms(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn incomplete_gamma_matches_statrs(a in 0.05f64..80.0, x in 0.0f64..200.0) {
        let want = statrs::function::gamma::gamma_ur(a, x);
        let got = gamma_q(a, x);
        prop_assert!((got - want).abs() <= 1e-12 + 1e-9 * want, "Q({a}, {x}) = {got} vs {want}");
        prop_assert!((gamma_p(a, x) + got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_squared_tail_matches_statrs(dof in 1usize..60, x in 0.0f64..150.0) {
        let want = ChiSquared::new(dof as f64).unwrap().sf(x);
        let got = chi_squared_sf(x, dof as f64);
        prop_assert!((got - want).abs() <= 1e-12 + 1e-9 * want, "{dof} {x}: {got} vs {want}");
    }

    #[test]
    fn kolmogorov_tail_against_plain_series(lambda in 0.5f64..3.0) {
        // above λ = 0.5 the alternating series has converged after a handful of terms
        let mut series = 0.0;
        for k in 1..100 {
            let k = k as f64;
            series += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        }
        prop_assert!((kolmogorov_q(lambda) - series).abs() < 1e-12);
    }

    #[test]
    fn uniformized_values_are_in_the_unit_interval(seed in any::<u64>()) {
        let params = HawkesParams::new(1.0, 0.5, KernelSpec::approx_power_law(0.1, 0.5));
        let s = simulate_branching(&params, (0.0, 300.0), seed, DEFAULT_CAP).unwrap();
        prop_assume!(s.len() >= 2);
        let xi = residual_transform(&s, &params).unwrap();
        prop_assert_eq!(xi.len(), s.len());
        prop_assert!(xi.windows(2).all(|w| w[1] >= w[0]));
        let u = uniformize(&xi);
        prop_assert_eq!(u.len(), s.len() - 1);
        prop_assert!(u.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn kolmogorov_tail_limits() {
    assert_eq!(kolmogorov_q(0.0), 1.0);
    assert!(kolmogorov_q(0.2) > 1.0 - 1e-12);
    assert!(kolmogorov_q(5.0) < 1e-20);
    let mut last = 1.0;
    for k in 1..400 {
        let q = kolmogorov_q(k as f64 * 0.01);
        assert!(q <= last + 1e-15);
        last = q;
    }
}

#[test]
fn residuals_match_brute_force() {
    let cases = [
        (KernelSpec::Exponential { tau: 0.5 }, 400.0),
        (KernelSpec::Omori { c: 0.2, theta: 0.6 }, 400.0),
        (KernelSpec::Omori { c: 0.2, theta: 0.6 }, 1500.0),
        (KernelSpec::CutoffPowerLaw { tau0: 0.3, epsilon: 0.8 }, 400.0),
        (KernelSpec::approx_power_law(0.05, 0.3), 400.0),
    ];
    for (spec, horizon) in cases {
        let params = HawkesParams::new(2.0, 0.6, spec);
        let s = simulate_branching(&params, (0.0, horizon), 21, DEFAULT_CAP).unwrap();
        let k = spec.build().unwrap();
        let fast = residual_transform(&s, &params).unwrap();
        let slow = tk::residuals_brute(&s, 2.0, 0.6, &k);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9 * b, "{spec:?} ({} events): {a} vs {b}", s.len());
        }
    }
}

#[test]
fn residuals_with_a_piecewise_background() {
    let profile = BackgroundProfile::new(vec![0.0, 100.0, 250.0, 400.0], vec![0.5, 3.0, 1.0]).unwrap();
    let spec = KernelSpec::Exponential { tau: 1.0 };
    let params = HawkesParams::with_profile(profile.clone(), 0.5, spec);
    let s = simulate_branching(&params, (0.0, 400.0), 2, DEFAULT_CAP).unwrap();
    let k = spec.build().unwrap();
    let fast = residual_transform(&s, &params).unwrap();
    // constant part of the oracle removed, then the profile integral added back
    let excited = tk::residuals_brute(&s, 0.0, 0.5, &k);
    for ((t, a), e) in s.times.iter().zip(&fast).zip(&excited) {
        let want = e + profile.cumulative(*t);
        assert!((a - want).abs() <= 1e-10 * want, "{a} vs {want}");
    }
}

#[test]
fn ks_p_values_are_uniform_under_the_null() {
    let ps: Vec<f64> = (0..1000)
        .map(|seed| ks_uniform_test(&uniforms(seed, 200)).unwrap().p_value)
        .collect();
    let (_, p) = tk::ks_one_sample(&ps, |x| x.clamp(0.0, 1.0));
    assert!(p > 0.001, "p-values not uniform: {p}");
    let size = ps.iter().filter(|&&p| p < 0.05).count() as f64 / 1000.0;
    assert!((0.03..=0.07).contains(&size), "{size}");
}

#[test]
fn ljung_box_size_is_nominal() {
    let reps = 1000;
    let rejections = (0..reps)
        .filter(|&seed| ljung_box_test(&uniforms(10_000 + seed, 1000), 20).unwrap().p_value < 0.05)
        .count();
    let size = rejections as f64 / reps as f64;
    assert!((0.03..=0.07).contains(&size), "{size}");
}

#[test]
fn ljung_box_detects_autocorrelation() {
    let mut rng = rng_from_seed(4);
    let mut x = 0.0;
    let ar: Vec<f64> = (0..1000)
        .map(|_| {
            x = 0.3 * x + rng.random::<f64>();
            x
        })
        .collect();
    assert!(ljung_box_test(&ar, 10).unwrap().p_value < 1e-6);
}

#[test]
fn degenerate_inputs_are_rejected() {
    assert!(ks_uniform_test(&[0.5; 5]).is_err());
    assert!(ljung_box_test(&[0.3; 100], 5).is_err());
    assert!(ljung_box_test(&uniforms(1, 10), 10).is_err());
    assert_eq!(default_lags(5), 1);
    assert_eq!(default_lags(150), 15);
    assert_eq!(default_lags(10_000), 20);
}

#[test]
fn true_model_passes_most_of_the_time() {
    let params = HawkesParams::new(0.5, 0.6, KernelSpec::approx_power_law(0.1, 0.5));
    let mut passes = 0;
    for seed in 0..100 {
        let s = burn(&simulate_branching(&params, (0.0, 6000.0), seed, DEFAULT_CAP).unwrap(), 1000.0, false);
        let report = residual_report(&s, &params, None).unwrap();
        if report.passes(0.05) {
            passes += 1;
        }
    }
    assert!(passes >= 85, "{passes}/100");
}

#[test]
fn wrong_model_is_rejected() {
    let truth = HawkesParams::new(0.5, 0.8, KernelSpec::Exponential { tau: 1.0 });
    let s = simulate_branching(&truth, (0.0, 20_000.0), 8, DEFAULT_CAP).unwrap();
    let poisson = HawkesParams::new(s.len() as f64 / s.duration(), 0.0, KernelSpec::Exponential { tau: 1.0 });
    let report = residual_report(&s, &poisson, None).unwrap();
    assert!(!report.passes(0.05));
    let series = EventSeries::new(s.times.clone(), s.window_start, s.window_end).unwrap();
    assert!(residual_report(&series, &truth, Some(5)).unwrap().lb_lags == 5);
}
