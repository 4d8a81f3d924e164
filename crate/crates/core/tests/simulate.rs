use hawkes_core::simulate::{
    burn, simulate_branching, simulate_branching_traced, simulate_poisson, simulate_thinning, DEFAULT_CAP,
};
use hawkes_core::{BackgroundProfile, HawkesParams, KernelSpec};
use hawkes_testkit as tk;
use proptest::prelude::*;

fn all_kernels() -> [KernelSpec; 4] {
    [
        KernelSpec::Exponential { tau: 0.1 },
        KernelSpec::Omori { c: 1.0, theta: 0.5 },
        KernelSpec::CutoffPowerLaw { tau0: 1.0, epsilon: 0.5 },
        KernelSpec::approx_power_law(0.1, 0.5),
    ]
}

fn within_three_se(counts: &[f64], expected: f64) -> bool {
    (tk::mean(counts) - expected).abs() <= 3.0 * tk::std_err(counts)
}

#[test]
fn no_excitation_is_poisson() {
    for kernel in all_kernels() {
        let params = HawkesParams::new(2.0, 0.0, kernel);
        for sim in [simulate_thinning, simulate_branching] {
            let counts: Vec<f64> = (0..200)
                .map(|seed| sim(&params, (0.0, 1000.0), seed, DEFAULT_CAP).unwrap().len() as f64)
                .collect();
            assert!(within_three_se(&counts, 2000.0), "{kernel:?}: mean {}", tk::mean(&counts));
        }
    }
}

#[test]
fn stationary_first_moment() {
    // E[N] = μT / (1 - n) once the transient is burned
    let params = HawkesParams::new(0.3, 0.7, KernelSpec::Exponential { tau: 0.1 });
    let horizon = 1e5;
    let burn_in = 100.0;
    let counts: Vec<f64> = (0..100)
        .map(|seed| {
            let s = simulate_thinning(&params, (0.0, burn_in + horizon), seed, DEFAULT_CAP).unwrap();
            burn(&s, burn_in, true).len() as f64
        })
        .collect();
    let expected = 0.3 * horizon / 0.3;
    assert!(within_three_se(&counts, expected), "mean {}", tk::mean(&counts));
    let ratio = tk::mean(&counts) / expected;
    assert!((0.97..=1.03).contains(&ratio));
}

#[test]
fn first_moment_for_power_law_memory() {
    let kernel = KernelSpec::approx_power_law(0.1, 1.0);
    let t99 = kernel.build().unwrap().characteristic_time(0.99).unwrap();
    let params = HawkesParams::new(0.3, 0.5, kernel);
    let (burn_in, horizon) = (10.0 * t99, 2e4);
    let counts: Vec<f64> = (0..100)
        .map(|seed| {
            let s = simulate_branching(&params, (0.0, burn_in + horizon), seed, DEFAULT_CAP).unwrap();
            burn(&s, burn_in, true).len() as f64
        })
        .collect();
    let ratio = tk::mean(&counts) / (0.3 * horizon / 0.5);
    assert!((0.97..=1.03).contains(&ratio), "{ratio}");
}

#[test]
fn thinning_and_branching_agree_in_law() {
    let params = HawkesParams::new(0.3, 0.7, KernelSpec::Exponential { tau: 0.1 });
    let burn_in = 100.0;
    let window = (0.0, burn_in + 1e4);
    let mut accepted = 0;
    for seed in 0..100u64 {
        let a = burn(&simulate_thinning(&params, window, seed, DEFAULT_CAP).unwrap(), burn_in, true);
        let b = burn(&simulate_branching(&params, window, 1000 + seed, DEFAULT_CAP).unwrap(), burn_in, true);
        // durations inside a cluster are correlated; every 10th one is close to independent
        let thin = |d: Vec<f64>| -> Vec<f64> { d.into_iter().step_by(10).collect() };
        let (_, p) = tk::ks_two_sample(&thin(a.durations()), &thin(b.durations()));
        if p >= 0.01 {
            accepted += 1;
        }
    }
    assert!(accepted >= 95, "only {accepted} of 100 paired runs agree");
}

#[test]
fn thinning_and_branching_agree_for_power_laws() {
    for kernel in [KernelSpec::Omori { c: 0.5, theta: 1.5 }, KernelSpec::approx_power_law(0.5, 1.0)] {
        let params = HawkesParams::new(0.5, 0.5, kernel);
        let window = (0.0, 3000.0);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for seed in 0..10 {
            let x = burn(&simulate_thinning(&params, window, seed, DEFAULT_CAP).unwrap(), 500.0, true);
            let y = burn(&simulate_branching(&params, window, 50 + seed, DEFAULT_CAP).unwrap(), 500.0, true);
            a.extend(x.durations().into_iter().step_by(10));
            b.extend(y.durations().into_iter().step_by(10));
        }
        let (_, p) = tk::ks_two_sample(&a, &b);
        assert!(p > 0.001, "{kernel:?}: p = {p}");
    }
}

#[test]
fn first_generation_offspring_mean_is_n() {
    let params = HawkesParams::new(1.0, 0.5, KernelSpec::Omori { c: 1.0, theta: 0.5 });
    let mut children = 0u64;
    let mut immigrants = 0u64;
    for seed in 0..10 {
        let tr = simulate_branching_traced(&params, (0.0, 1e4), seed, DEFAULT_CAP).unwrap();
        for (g, k) in tr.generation.iter().zip(&tr.offspring) {
            if *g == 0 {
                immigrants += 1;
                children += *k as u64;
            }
        }
    }
    let mean = children as f64 / immigrants as f64;
    assert!((mean - 0.5).abs() < 0.02, "{mean}");
}

#[test]
fn piecewise_background_under_both_simulators() {
    let profile = BackgroundProfile::new(vec![0.0, 500.0, 1500.0, 2000.0], vec![0.5, 2.0, 0.0]).unwrap();
    let params = HawkesParams::with_profile(profile.clone(), 0.4, KernelSpec::Exponential { tau: 1.0 });
    for sim in [simulate_thinning, simulate_branching] {
        let late: Vec<f64> = (0..200)
            .map(|seed| {
                let s = sim(&params, (0.0, 2000.0), seed, DEFAULT_CAP).unwrap();
                s.slice(600.0, 1500.0).len() as f64
            })
            .collect();
        // deep inside the second segment the rate is 2 / (1 - 0.4)
        assert!(within_three_se(&late, 900.0 * 2.0 / 0.6), "{}", tk::mean(&late));
        let silent: Vec<f64> = (0..50)
            .map(|seed| sim(&params, (0.0, 2000.0), seed, DEFAULT_CAP).unwrap().slice(1600.0, 2000.0).len() as f64)
            .collect();
        // only late offspring of earlier events, which die out within a few τ
        assert!(tk::mean(&silent) < 0.1);
    }
}

#[test]
fn poisson_segments() {
    let p = BackgroundProfile::constant(0.0, 1e4, 7.0).unwrap();
    let counts: Vec<f64> = (0..100).map(|s| simulate_poisson(&p, (0.0, 1e4), s).unwrap().len() as f64).collect();
    assert!(within_three_se(&counts, 7e4));
    let two = BackgroundProfile::new(vec![0.0, 1e4, 2e4], vec![1.0, 2.0]).unwrap();
    let (mut first, mut second) = (0usize, 0usize);
    for seed in 0..20 {
        let s = simulate_poisson(&two, (0.0, 2e4), seed).unwrap();
        first += s.count_until(1e4);
        second += s.len() - s.count_until(1e4);
    }
    let ratio = second as f64 / first as f64;
    assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seeded_runs_are_bit_identical(seed in any::<u64>(), n in 0.0f64..0.9, which in 0usize..4) {
        let params = HawkesParams::new(0.5, n, all_kernels()[which]);
        let a = simulate_branching(&params, (0.0, 500.0), seed, DEFAULT_CAP).unwrap();
        let b = simulate_branching(&params, (0.0, 500.0), seed, DEFAULT_CAP).unwrap();
        prop_assert_eq!(&a, &b);
        let c = simulate_thinning(&params, (0.0, 200.0), seed, DEFAULT_CAP).unwrap();
        let d = simulate_thinning(&params, (0.0, 200.0), seed, DEFAULT_CAP).unwrap();
        prop_assert_eq!(&c, &d);
        for s in [&a, &c] {
            prop_assert!(s.times.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.times.iter().all(|&t| t > s.window_start && t <= s.window_end));
        }
    }

    #[test]
    fn burn_keeps_only_later_events(seed in any::<u64>(), cut in 0.0f64..300.0) {
        let params = HawkesParams::new(1.0, 0.5, KernelSpec::Exponential { tau: 1.0 });
        let s = simulate_branching(&params, (0.0, 300.0), seed, DEFAULT_CAP).unwrap();
        let b = burn(&s, cut, false);
        prop_assert_eq!(b.len(), s.len() - s.count_until(cut));
        prop_assert!(b.times.iter().all(|&t| t > cut));
        let r = burn(&s, cut, true);
        prop_assert_eq!(r.window_start, 0.0);
        prop_assert!((r.window_end - (300.0 - cut)).abs() < 1e-9);
    }
}
