//! Inter-event duration quantiles of near-critical power-law processes.
//!
//! For every `(n, τ0)` cell the durations of each realization give Q90, Q95,
//! Q99 and the maximum; the table reports their averages over realizations
//! and the ratios Q95/Q90, Q99/Q95, Max/Q99. With `include_poisson` an
//! `n = 0` row is added as a check against the exponential law.

use hawkes_core::{HawkesParams, KernelSpec};
use serde::Serialize;

use super::{
    burn_flag, cell, par_collect, quantile_sorted, settings_json, simulate_stationary, stream, Common, Defaults,
    ExperimentOutput, Result, Table,
};
use crate::config::Config;

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub common: Common,
    pub mu: f64,
    pub epsilon: f64,
    pub ns: Vec<f64>,
    pub tau0s: Vec<f64>,
    pub include_poisson: bool,
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let defaults = Defaults {
            realizations: 5,
            window: 1e5,
            burn_in: 1e8,
            scale: 1e-3,
        };
        Ok(Settings {
            common: Common::from_config(cfg, defaults)?,
            mu: cfg.get_or("mu", 0.02)?,
            epsilon: cfg.get_or("epsilon", 0.15)?,
            ns: cfg.list_or("ns", &[0.3, 0.5, 0.7, 0.95, 0.99])?,
            tau0s: cfg.list_or("tau0s", &[1.0, 0.1, 0.01])?,
            include_poisson: cfg.get_or("include_poisson", true)?,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Quantiles {
    events: f64,
    q90: f64,
    q95: f64,
    q99: f64,
    max: f64,
}

pub fn run(s: &Settings) -> Result<ExperimentOutput> {
    let c = &s.common;
    let burn_in = c.effective_burn();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    if s.include_poisson {
        cells.push((0.0, s.tau0s.first().copied().unwrap_or(1.0)));
    }
    for &n in &s.ns {
        cells.extend(s.tau0s.iter().map(|&t| (n, t)));
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|k| (0..c.realizations).map(move |r| (k, r)))
        .collect();
    let per_job = par_collect(jobs.len(), |j| {
        let (k, r) = jobs[j];
        let (n, tau0) = cells[k];
        let params = HawkesParams::new(s.mu, n, KernelSpec::approx_power_law(tau0, s.epsilon));
        let series = simulate_stationary(&params, c.window, burn_in, stream(c.seed(r), k as u64))?;
        let mut d = series.durations();
        d.sort_by(f64::total_cmp);
        Ok(Quantiles {
            events: series.len() as f64,
            q90: quantile_sorted(&d, 0.90),
            q95: quantile_sorted(&d, 0.95),
            q99: quantile_sorted(&d, 0.99),
            max: d.last().copied().unwrap_or(f64::NAN),
        })
    })?;
    let mut table = Table::new(
        "quantiles",
        &["n", "tau0", "realizations", "events", "q90", "q95", "q99", "max", "q95_q90", "q99_q95", "max_q99"],
    );
    for (k, &(n, tau0)) in cells.iter().enumerate() {
        let qs: Vec<Quantiles> = jobs
            .iter()
            .zip(&per_job)
            .filter(|((kk, _), _)| *kk == k)
            .map(|(_, q)| *q)
            .collect();
        let avg = |f: fn(&Quantiles) -> f64| qs.iter().map(f).sum::<f64>() / qs.len() as f64;
        let (q90, q95, q99, max) = (avg(|q| q.q90), avg(|q| q.q95), avg(|q| q.q99), avg(|q| q.max));
        table.push(vec![
            cell(n),
            cell(tau0),
            qs.len().to_string(),
            cell(avg(|q| q.events)),
            cell(q90),
            cell(q95),
            cell(q99),
            cell(max),
            cell(q95 / q90),
            cell(q99 / q95),
            cell(max / q99),
        ]);
    }
    let flags = s
        .tau0s
        .iter()
        .filter_map(|&t| burn_flag(&format!("tau0={t}"), &KernelSpec::approx_power_law(t, s.epsilon), burn_in))
        .collect();
    Ok(ExperimentOutput {
        id: "quantile_table".into(),
        sweep: None,
        tables: vec![table],
        settings: settings_json(s),
        flags,
    })
}
