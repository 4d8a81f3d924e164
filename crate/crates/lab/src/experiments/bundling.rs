//! Timestamp bundling followed by randomization.
//!
//! Three generators are quantized to packet edges of width `bundle_width`,
//! then redistributed uniformly in cells of width `Δ` and refitted:
//! - `i`: exponential Hawkes, fitted with an exponential kernel,
//! - `ii`: power-law surrogate Hawkes, fitted with the surrogate,
//! - `iii`: homogeneous Poisson, fitted with the surrogate.
//!
//! The `asymptote` table holds exponential fits to bundled Poisson data at a
//! small `Δ` as a function of the Poisson rate; the `cusp` table locates the
//! kink of each mean `n̂(Δ)` curve with [`detect_cusp`].

use hawkes_core::preprocess::{bundle, randomize, BundleEdge};
use hawkes_core::simulate::simulate_poisson;
use hawkes_core::{BackgroundProfile, EventSeries, HawkesParams, KernelFamily, KernelSpec};
use serde::Serialize;

use super::{
    burn_flag, cell, checked_fit, detect_cusp, par_collect, settings_json, simulate_stationary, stream, Common,
    Defaults, Estimate, ExperimentError, ExperimentOutput, Result, SweepResult, Table,
};
use crate::config::Config;

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub common: Common,
    pub generators: Vec<String>,
    pub bundle_width: f64,
    pub edge: BundleEdge,
    pub deltas: Vec<f64>,
    pub exp_mu: f64,
    pub exp_n: f64,
    pub exp_tau: f64,
    pub apl_mu: f64,
    pub apl_n: f64,
    pub apl_tau0: f64,
    pub apl_epsilon: f64,
    pub poisson_rate: f64,
    pub asymptote_rates: Vec<f64>,
    pub asymptote_delta: f64,
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let defaults = Defaults {
            realizations: 20,
            window: 1e5,
            burn_in: 1e6,
            scale: 0.1,
        };
        let edge = match cfg.get("edge").unwrap_or("right") {
            "right" => BundleEdge::Right,
            "left" => BundleEdge::Left,
            other => return Err(ExperimentError::Invalid(format!("edge must be right or left, got `{other}`"))),
        };
        let s = Settings {
            common: Common::from_config(cfg, defaults)?,
            generators: cfg.list_or("generators", &["i".to_string(), "ii".into(), "iii".into()])?,
            bundle_width: cfg.get_or("bundle_width", 1.0)?,
            edge,
            deltas: cfg.list_or(
                "deltas",
                &[0.001, 0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            )?,
            exp_mu: cfg.get_or("exp.mu", 3.5)?,
            exp_n: cfg.get_or("exp.n", 0.5)?,
            exp_tau: cfg.get_or("exp.tau", 0.6)?,
            apl_mu: cfg.get_or("apl.mu", 3.5)?,
            apl_n: cfg.get_or("apl.n", 0.5)?,
            apl_tau0: cfg.get_or("apl.tau0", 0.3)?,
            apl_epsilon: cfg.get_or("apl.epsilon", 1.0)?,
            poisson_rate: cfg.get_or("poisson.rate", 7.0)?,
            asymptote_rates: cfg.list_or("asymptote.rates", &[1.0, 2.0, 3.0, 5.0, 7.0, 10.0])?,
            asymptote_delta: cfg.get_or("asymptote.delta", 0.001)?,
        };
        if let Some(bad) = s.generators.iter().find(|g| !["i", "ii", "iii"].contains(&g.as_str())) {
            return Err(ExperimentError::Invalid(format!("unknown generator `{bad}`")));
        }
        if s.deltas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ExperimentError::Invalid("deltas must be increasing".into()));
        }
        Ok(s)
    }

    fn apl(&self) -> KernelSpec {
        KernelSpec::approx_power_law(self.apl_tau0, self.apl_epsilon)
    }
}

fn poisson(rate: f64, window: f64, seed: u64) -> Result<EventSeries> {
    let profile = BackgroundProfile::constant(0.0, window, rate)?;
    Ok(simulate_poisson(&profile, (0.0, window), seed)?)
}

pub fn run(s: &Settings) -> Result<ExperimentOutput> {
    let c = &s.common;
    let burn_in = c.effective_burn();
    let jobs: Vec<(usize, usize)> = (0..s.generators.len())
        .flat_map(|g| (0..c.realizations).map(move |r| (g, r)))
        .collect();
    let per_job = par_collect(jobs.len(), |j| {
        let (g, r) = jobs[j];
        let seed = c.seed(r);
        let name = s.generators[g].as_str();
        let (raw, family) = match name {
            "i" => {
                let params = HawkesParams::new(s.exp_mu, s.exp_n, KernelSpec::Exponential { tau: s.exp_tau });
                (simulate_stationary(&params, c.window, burn_in, stream(seed, 1))?, KernelFamily::Exponential)
            }
            "ii" => {
                let params = HawkesParams::new(s.apl_mu, s.apl_n, s.apl());
                (simulate_stationary(&params, c.window, burn_in, stream(seed, 2))?, KernelFamily::approx_power_law())
            }
            _ => (poisson(s.poisson_rate, c.window, stream(seed, 3))?, KernelFamily::approx_power_law()),
        };
        let bundled = bundle(&raw, s.bundle_width, s.edge)?;
        let mut out = Vec::new();
        for (d, &delta) in s.deltas.iter().enumerate() {
            let data = randomize(&bundled, delta, stream(seed, 100 + d as u64))?;
            let fit = checked_fit(&data, &family, &c.fit)?;
            out.push(Estimate::from_fit(name, delta, r, seed, &fit));
        }
        Ok(out)
    })?;
    let estimates: Vec<Estimate> = per_job.into_iter().flatten().collect();
    let sweep = SweepResult::from_estimates("bundling", "delta", c.realizations, estimates);

    let mut cusp = Table::new("cusp", &["generator", "cusp_delta"]);
    for g in &s.generators {
        let rows = sweep.case(g);
        let xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.mean_n).collect();
        cusp.push(vec![g.clone(), cell(detect_cusp(&xs, &ys).unwrap_or(f64::NAN))]);
    }

    let mut tables = vec![cusp];
    if !s.asymptote_rates.is_empty() {
        tables.push(asymptote(s)?);
    }
    let mut flags = Vec::new();
    if s.generators.iter().any(|g| g == "ii") {
        flags.extend(burn_flag("generator ii", &s.apl(), burn_in));
    }
    Ok(ExperimentOutput {
        id: "bundling".into(),
        sweep: Some(sweep),
        tables,
        settings: settings_json(s),
        flags,
    })
}

fn asymptote(s: &Settings) -> Result<Table> {
    let c = &s.common;
    let jobs: Vec<(usize, usize)> = (0..s.asymptote_rates.len())
        .flat_map(|k| (0..c.realizations).map(move |r| (k, r)))
        .collect();
    let n_hats = par_collect(jobs.len(), |j| {
        let (k, r) = jobs[j];
        let seed = c.seed(r);
        let raw = poisson(s.asymptote_rates[k], c.window, stream(seed, 1000 + k as u64))?;
        let bundled = bundle(&raw, s.bundle_width, s.edge)?;
        let data = randomize(&bundled, s.asymptote_delta, stream(seed, 2000 + k as u64))?;
        Ok(checked_fit(&data, &KernelFamily::Exponential, &c.fit)?.n_hat)
    })?;
    let mut table = Table::new("asymptote", &["rate", "count", "mean_n", "std_n"]);
    for (k, &rate) in s.asymptote_rates.iter().enumerate() {
        let xs: Vec<f64> = jobs
            .iter()
            .zip(&n_hats)
            .filter(|((kk, _), _)| *kk == k)
            .map(|(_, &v)| v)
            .collect();
        table.push(vec![
            cell(rate),
            xs.len().to_string(),
            cell(super::mean(&xs)),
            cell(super::sample_std(&xs)),
        ]);
    }
    Ok(table)
}
