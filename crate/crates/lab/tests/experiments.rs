use hawkes_lab::config::Config;
use hawkes_lab::experiments::{self, detect_cusp, quantile_sorted, scale_audit, ExperimentOutput, EXPERIMENTS};
use proptest::prelude::*;

fn config(pairs: &[(&str, &str)]) -> Config {
    let small = [
        ("scale", "1"),
        ("burn_in", "100"),
        ("realizations", "2"),
        ("fit.grid_time", "3"),
        ("fit.grid_exponent", "3"),
    ];
    small
        .iter()
        .chain(pairs)
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn tiny(id: &str) -> Config {
    match id {
        "outlier_bias" => config(&[
            ("window", "3000"),
            ("kernels", "exponential"),
            ("fractions", "0, 0.01"),
            ("multipliers", "2"),
        ]),
        "kernel_misspec" => config(&[("window", "3000"), ("ns", "0.3, 0.6"), ("mu", "0.5")]),
        "edge_effect" => config(&[
            ("window", "2000"),
            ("rates.horizon", "100"),
            ("rates.epsilons", "0.5"),
            ("rates.realizations", "2"),
            ("subwindows.mu", "0.5"),
            ("subwindows.n", "0.5"),
            ("subwindows.tau0s", "0.1"),
            ("subwindows.epsilons", "0.5"),
            ("subwindows.length", "500"),
        ]),
        "bundling" => config(&[("window", "300"), ("deltas", "0.1, 0.5"), ("asymptote.rates", "1, 2")]),
        "regime_shift" => config(&[("window", "1500"), ("n2_values", "0.2"), ("mu2_values", "1.6")]),
        "poisson_criticality" => config(&[("days", "3"), ("day_length", "500"), ("median_rate", "0.5")]),
        "quantile_table" => config(&[("window", "2000"), ("ns", "0.5"), ("tau0s", "1, 0.1")]),
        "residual_size" => config(&[("window", "1500"), ("days", "3"), ("day_length", "500")]),
        other => panic!("no tiny config for {other}"),
    }
}

fn check_invariants(out: &ExperimentOutput) {
    if let Some(sweep) = &out.sweep {
        assert!(!sweep.rows.is_empty(), "{}", out.id);
        assert!(
            sweep.max_stationarity_residual <= experiments::STATIONARITY_TOLERANCE,
            "{}: {}",
            out.id,
            sweep.max_stationarity_residual
        );
        let counted: usize = sweep.rows.iter().map(|r| r.count).sum();
        assert_eq!(counted, sweep.estimates.len());
        for e in &sweep.estimates {
            assert!(e.n_hat >= 0.0 && e.mu_hat >= 0.0, "{}: {e:?}", out.id);
        }
    }
    for t in &out.tables {
        assert!(!t.rows.is_empty(), "{}/{}", out.id, t.name);
        assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
    }
}

#[test]
fn every_experiment_runs_at_a_tiny_size_and_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    for id in EXPERIMENTS {
        let out = experiments::run(id, &tiny(id)).unwrap_or_else(|e| panic!("{id}: {e}"));
        assert_eq!(out.id, *id);
        check_invariants(&out);
        let files = out.write(dir.path()).unwrap();
        assert!(files.iter().all(|f| f.exists()));
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{id}.meta.json"))).unwrap())
                .unwrap();
        assert!(meta.get("settings").is_some(), "{id}");
    }
}

#[test]
fn experiment_specific_tables_are_present() {
    let bundling = experiments::run("bundling", &tiny("bundling")).unwrap();
    let asymptote = bundling.table("asymptote").unwrap();
    assert_eq!(asymptote.rows.len(), 2);
    assert_eq!(bundling.table("cusp").unwrap().rows.len(), 3);

    let quantiles = experiments::run("quantile_table", &tiny("quantile_table")).unwrap();
    let q = quantiles.table("quantiles").unwrap();
    // Poisson reference row plus one per tau0
    assert_eq!(q.rows.len(), 3);
    for row in 0..q.rows.len() {
        assert!(q.value(row, "q90") <= q.value(row, "q95"));
        assert!(q.value(row, "q95") <= q.value(row, "q99"));
        assert!(q.value(row, "q99") <= q.value(row, "max"));
    }

    let residual = experiments::run("residual_size", &tiny("residual_size")).unwrap();
    let pass = residual.table("pass_rates").unwrap();
    for row in 0..pass.rows.len() {
        let rate = pass.value(row, "pass_rate");
        assert!((0.0..=1.0).contains(&rate));
    }

    let criticality = experiments::run("poisson_criticality", &tiny("poisson_criticality")).unwrap();
    assert_eq!(criticality.table("daily_rates").unwrap().rows.len(), 2 * 3);
    assert_eq!(criticality.table("summary").unwrap().rows.len(), 4);

    let edge = experiments::run("edge_effect", &tiny("edge_effect")).unwrap();
    assert_eq!(edge.table("rates").unwrap().rows.len(), 10);
    assert!(edge.table("markers").is_some());
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let cfg = tiny("kernel_misspec");
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let run_on = |threads| {
        let cfg = cfg.clone();
        pool(threads).install(move || experiments::run("kernel_misspec", &cfg)).unwrap()
    };
    let (one, three) = (run_on(1), run_on(3));
    // NaN p-values defeat ==, so compare the printed form
    let show = |o: ExperimentOutput| format!("{:?}", o.sweep.unwrap().estimates);
    assert_eq!(show(one), show(three));
}

#[test]
fn the_seed_base_selects_the_realizations() {
    let mut cfg = tiny("regime_shift");
    let a = experiments::run("regime_shift", &cfg).unwrap().sweep.unwrap();
    cfg.set("seed_base", "2");
    let b = experiments::run("regime_shift", &cfg).unwrap().sweep.unwrap();
    // realization 1 of base 1 is realization 0 of base 2
    let first = |s: &experiments::SweepResult, r: usize| {
        s.estimates.iter().find(|e| e.realization == r).unwrap().clone()
    };
    let (ea, eb) = (first(&a, 1), first(&b, 0));
    assert_eq!(ea.seed, eb.seed);
    assert_eq!(ea.n_hat, eb.n_hat);
    assert_ne!(first(&a, 0).n_hat, first(&b, 0).n_hat);
}

#[test]
fn unknown_ids_and_bad_settings_are_rejected() {
    assert!(experiments::run("nope", &Config::default()).is_err());
    let bad_scale = config(&[("scale", "2")]);
    assert!(experiments::run("regime_shift", &bad_scale).is_err());
    let bad_case = config(&[("cases", "iv")]);
    assert!(experiments::run("kernel_misspec", &bad_case).is_err());
}

#[test]
fn scale_audit_pairs_every_sweep_row() {
    let cfg = config(&[("window", "1500"), ("burn_in", "1000"), ("panels", "n2"), ("n2_values", "0.2, 0.5")]);
    let rows = scale_audit("regime_shift", &cfg, (0.1, 0.3)).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r.band >= 0.0);
        assert_eq!(r.flagged, (r.mean_a - r.mean_b).abs() > r.band);
    }
    assert!(scale_audit("quantile_table", &tiny("quantile_table"), (0.1, 0.3)).is_err());
}

#[test]
fn cusp_detection_on_a_sampled_curve() {
    let xs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
    let ys = [0.5, 0.45, 0.42, 0.40, 0.36, 0.55, 0.74];
    assert_eq!(detect_cusp(&xs, &ys), Some(0.5));
    let convex: Vec<f64> = xs.iter().map(|x| x * x).collect();
    assert_eq!(detect_cusp(&xs, &convex), None);
}

proptest! {
    #[test]
    fn sample_quantiles_are_monotone(mut v in prop::collection::vec(0.0f64..1e3, 1..200), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        v.sort_by(f64::total_cmp);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (qa, qb) = (quantile_sorted(&v, lo), quantile_sorted(&v, hi));
        prop_assert!(qa <= qb);
        prop_assert!(v[0] <= qa && qb <= v[v.len() - 1]);
    }

    #[test]
    fn later_config_keys_override(values in prop::collection::vec(-1e6f64..1e6, 1..6)) {
        let text: String = values.iter().map(|v| format!("x = {v}\n")).collect();
        let cfg = Config::parse(&text, std::path::Path::new(".")).unwrap();
        prop_assert_eq!(cfg.get_or("x", 0.0).unwrap(), *values.last().unwrap());
    }
}

#[test]
fn presets_load_and_configure_a_run() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    for name in ["quick.cfg", "full.cfg"] {
        let cfg = Config::load(&dir.join(name)).unwrap();
        assert!(cfg.get_or("scale", 0.0).unwrap() > 0.0, "{name}");
    }
    let mut quick = Config::load(&dir.join("quick.cfg")).unwrap();
    quick.set("realizations", "1");
    quick.set("window", "1000");
    quick.set("n2_values", "0.2");
    quick.set("panels", "n2");
    quick.set("orders", "forward");
    let out = experiments::run("regime_shift", &quick).unwrap();
    assert_eq!(out.sweep.unwrap().estimates.len(), 1);
}
