//! Edge effects of long memory near criticality.
//!
//! Panel `rates`: average event rate in consecutive bins of processes
//! started from an empty history, one curve per exponent, with the kernel's
//! `T_0.95`/`T_0.99` and the stationary plateau `μ/(1-n)` in a markers table.
//!
//! Panel `subwindows`: a long power-law surrogate series is cut into short
//! subwindows, each fitted with an exponential kernel. Cases are `eps=<ε>`,
//! the axis is `τ0`; every subwindow counts as one estimate.

use hawkes_core::simulate::{simulate_branching, DEFAULT_CAP};
use hawkes_core::{HawkesParams, KernelFamily, KernelSpec};
use serde::Serialize;

use super::{
    burn_flag, cell, checked_fit, par_collect, settings_json, simulate_stationary, stream, Common, Defaults,
    Estimate, ExperimentError, ExperimentOutput, Result, SweepResult, Table,
};
use crate::config::Config;

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub common: Common,
    pub panels: Vec<String>,
    pub rate_mu: f64,
    pub rate_n: f64,
    pub rate_tau0: f64,
    pub rate_epsilons: Vec<f64>,
    pub rate_horizon: f64,
    pub rate_bin: f64,
    pub rate_realizations: usize,
    pub fit_mu: f64,
    pub fit_n: f64,
    pub fit_tau0s: Vec<f64>,
    pub fit_epsilons: Vec<f64>,
    pub subwindow: f64,
    pub subwindow_realizations: usize,
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let defaults = Defaults {
            realizations: 20,
            window: 1e6,
            burn_in: 1e9,
            scale: 1e-3,
        };
        let common = Common::from_config(cfg, defaults)?;
        let s = Settings {
            panels: cfg.list_or("panels", &["rates".to_string(), "subwindows".into()])?,
            rate_mu: cfg.get_or("rates.mu", 1.0)?,
            rate_n: cfg.get_or("rates.n", 0.99)?,
            rate_tau0: cfg.get_or("rates.tau0", 1.0)?,
            rate_epsilons: cfg.list_or("rates.epsilons", &[1.0, 0.5, 0.2])?,
            rate_horizon: cfg.get_or("rates.horizon", 1e4)?,
            rate_bin: cfg.get_or("rates.bin", 10.0)?,
            rate_realizations: cfg.get_or("rates.realizations", common.realizations)?,
            fit_mu: cfg.get_or("subwindows.mu", 0.02)?,
            fit_n: cfg.get_or("subwindows.n", 0.99)?,
            fit_tau0s: cfg.list_or("subwindows.tau0s", &[1e-3, 1e-2, 1e-1, 1.0])?,
            fit_epsilons: cfg.list_or("subwindows.epsilons", &[0.1, 0.15, 0.2, 0.5, 1.0])?,
            subwindow: cfg.get_or("subwindows.length", 1800.0)?,
            subwindow_realizations: cfg.get_or("subwindows.realizations", 1)?,
            common,
        };
        if !(s.rate_bin > 0.0 && s.rate_horizon >= s.rate_bin && s.subwindow > 0.0) {
            return Err(ExperimentError::Invalid("bin, horizon and subwindow lengths must be positive".into()));
        }
        Ok(s)
    }

    fn wants(&self, panel: &str) -> bool {
        self.panels.iter().any(|p| p == panel)
    }
}

fn rate_panel(s: &Settings) -> Result<(Table, Table)> {
    let bins = (s.rate_horizon / s.rate_bin).floor() as usize;
    let jobs: Vec<(usize, usize)> = (0..s.rate_epsilons.len())
        .flat_map(|e| (0..s.rate_realizations).map(move |r| (e, r)))
        .collect();
    let counts = par_collect(jobs.len(), |j| {
        let (e, r) = jobs[j];
        let spec = KernelSpec::approx_power_law(s.rate_tau0, s.rate_epsilons[e]);
        let params = HawkesParams::new(s.rate_mu, s.rate_n, spec);
        let series = simulate_branching(
            &params,
            (0.0, bins as f64 * s.rate_bin),
            stream(s.common.seed(r), 10 + e as u64),
            DEFAULT_CAP,
        )?;
        let mut hist = vec![0u64; bins];
        for &t in &series.times {
            // events sit in (0, horizon]; bin k covers (k·bin, (k+1)·bin]
            let k = ((t / s.rate_bin).ceil() as usize).saturating_sub(1).min(bins - 1);
            hist[k] += 1;
        }
        Ok(hist)
    })?;
    let mut header = vec!["time".to_string()];
    header.extend(s.rate_epsilons.iter().map(|e| format!("rate_eps_{e}")));
    let mut rates = Table {
        name: "rates".into(),
        header,
        rows: Vec::new(),
    };
    let mut curves = vec![vec![0.0; bins]; s.rate_epsilons.len()];
    for (&(e, _), hist) in jobs.iter().zip(&counts) {
        for (k, &h) in hist.iter().enumerate() {
            curves[e][k] += h as f64 / (s.rate_bin * s.rate_realizations as f64);
        }
    }
    for k in 0..bins {
        let mut row = vec![cell((k as f64 + 0.5) * s.rate_bin)];
        row.extend(curves.iter().map(|c| cell(c[k])));
        rates.push(row);
    }
    let plateau = s.rate_mu / (1.0 - s.rate_n);
    let mut markers = Table::new("markers", &["epsilon", "t95", "t99", "plateau", "time_to_95pct_plateau"]);
    for (e, &eps) in s.rate_epsilons.iter().enumerate() {
        let kernel = KernelSpec::approx_power_law(s.rate_tau0, eps).build()?;
        let reached = curves[e]
            .iter()
            .position(|&v| v >= 0.95 * plateau)
            .map_or(f64::NAN, |k| (k as f64 + 0.5) * s.rate_bin);
        markers.push(vec![
            cell(eps),
            cell(kernel.characteristic_time(0.95)?),
            cell(kernel.characteristic_time(0.99)?),
            cell(plateau),
            cell(reached),
        ]);
    }
    Ok((rates, markers))
}

fn subwindow_panel(s: &Settings) -> Result<(Vec<Estimate>, Vec<String>, Table)> {
    let c = &s.common;
    let burn_in = c.effective_burn();
    let configs: Vec<(f64, f64)> = s
        .fit_epsilons
        .iter()
        .flat_map(|&e| s.fit_tau0s.iter().map(move |&t| (e, t)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|i| (0..s.subwindow_realizations).map(move |r| (i, r)))
        .collect();
    let per_job = par_collect(jobs.len(), |j| {
        let (i, r) = jobs[j];
        let (eps, tau0) = configs[i];
        let seed = c.seed(r);
        let params = HawkesParams::new(s.fit_mu, s.fit_n, KernelSpec::approx_power_law(tau0, eps));
        let series = simulate_stationary(&params, c.window, burn_in, stream(seed, 100 + i as u64))?;
        let pieces = (c.window / s.subwindow).floor() as usize;
        let case = format!("eps={eps}");
        let mut out = Vec::new();
        let mut skipped = 0usize;
        for p in 0..pieces {
            let start = p as f64 * s.subwindow;
            let sub = series.slice(start, start + s.subwindow).shifted(-start);
            match checked_fit(&sub, &KernelFamily::Exponential, &c.fit) {
                Ok(fit) => out.push(Estimate::from_fit(&case, tau0, r, seed, &fit)),
                Err(super::ExperimentError::Model(hawkes_core::Error::InsufficientData(_))) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Ok((out, skipped))
    })?;
    let mut skipped = Table::new("skipped", &["epsilon", "tau0", "realization", "skipped_subwindows"]);
    let mut estimates = Vec::new();
    for (&(i, r), (est, k)) in jobs.iter().zip(per_job) {
        skipped.push(vec![cell(configs[i].0), cell(configs[i].1), r.to_string(), k.to_string()]);
        estimates.extend(est);
    }
    let flags = configs
        .iter()
        .filter_map(|&(eps, tau0)| {
            burn_flag(
                &format!("eps={eps}, tau0={tau0}"),
                &KernelSpec::approx_power_law(tau0, eps),
                burn_in,
            )
        })
        .collect();
    Ok((estimates, flags, skipped))
}

pub fn run(s: &Settings) -> Result<ExperimentOutput> {
    let mut tables = Vec::new();
    let mut flags = Vec::new();
    let mut sweep = None;
    if s.wants("rates") {
        let (rates, markers) = rate_panel(s)?;
        tables.push(rates);
        tables.push(markers);
    }
    if s.wants("subwindows") {
        let (estimates, f, skipped) = subwindow_panel(s)?;
        flags.extend(f);
        tables.push(skipped);
        sweep = Some(SweepResult::from_estimates(
            "edge_effect",
            "tau0",
            s.subwindow_realizations,
            estimates,
        ));
    }
    Ok(ExperimentOutput {
        id: "edge_effect".into(),
        sweep,
        tables,
        settings: settings_json(s),
        flags,
    })
}
