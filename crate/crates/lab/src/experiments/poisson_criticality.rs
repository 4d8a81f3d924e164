//! Spurious criticality from day-to-day changes of the activity level.
//!
//! A block is `days` consecutive trading days of length `day_length`. Daily
//! rates are lognormal with the given median and log-dispersion; each day is
//! simulated independently and the days are concatenated without gaps. Every
//! block is fitted with the power-law surrogate. Variants:
//! - `poisson`: each day a homogeneous Poisson process at its daily rate,
//! - `poisson_dropped`: the same days minus those below `drop_below × median`,
//! - `hawkes`: each day an exponential Hawkes process with background
//!   `(1 - n)·λ_i`, so its mean rate is still `λ_i`,
//! - `constant`: Poisson days all at the median rate (control).
//!
//! Cases are the variant names; the axis value is the block index.

use hawkes_core::preprocess::concatenate;
use hawkes_core::simulate::{rng_from_seed, simulate_branching, simulate_poisson, DEFAULT_CAP};
use hawkes_core::{BackgroundProfile, EventSeries, HawkesParams, KernelFamily, KernelSpec};
use rand_distr::{Distribution, LogNormal};
use serde::Serialize;

use super::{
    cell, checked_fit, par_collect, settings_json, stream, Common, Defaults, Estimate, ExperimentError,
    ExperimentOutput, Result, SweepResult, Table,
};
use crate::config::Config;

const VARIANTS: [&str; 4] = ["poisson", "poisson_dropped", "hawkes", "constant"];

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    /// `realizations` is the number of blocks; `window` is unused.
    pub common: Common,
    pub variants: Vec<String>,
    pub days: usize,
    pub day_length: f64,
    pub median_rate: f64,
    pub sigma: f64,
    pub drop_below: f64,
    pub hawkes_n: f64,
    pub hawkes_tau: f64,
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let defaults = Defaults {
            realizations: 10,
            window: 22_500.0,
            burn_in: 0.0,
            scale: 1.0,
        };
        let s = Settings {
            common: Common::from_config(cfg, defaults)?,
            variants: cfg.list_or("variants", &VARIANTS.map(String::from))?,
            days: cfg.get_or("days", 44)?,
            day_length: cfg.get_or("day_length", 22_500.0)?,
            median_rate: cfg.get_or("median_rate", 0.25)?,
            sigma: cfg.get_or("sigma", 0.6)?,
            drop_below: cfg.get_or("drop_below", 0.5)?,
            hawkes_n: cfg.get_or("hawkes.n", 0.3)?,
            hawkes_tau: cfg.get_or("hawkes.tau", 10.0)?,
        };
        if let Some(bad) = s.variants.iter().find(|v| !VARIANTS.contains(&v.as_str())) {
            return Err(ExperimentError::Invalid(format!("unknown variant `{bad}`")));
        }
        if s.days == 0 || !(s.day_length > 0.0 && s.median_rate > 0.0 && s.sigma >= 0.0) {
            return Err(ExperimentError::Invalid("days, day length and median rate must be positive".into()));
        }
        Ok(s)
    }

    /// Daily rates of block `seed`.
    pub fn daily_rates(&self, seed: u64) -> Result<Vec<f64>> {
        let law = LogNormal::new(self.median_rate.ln(), self.sigma)
            .map_err(|e| ExperimentError::Invalid(format!("lognormal: {e}")))?;
        let mut rng = rng_from_seed(stream(seed, 1));
        Ok((0..self.days).map(|_| law.sample(&mut rng)).collect())
    }
}

fn day(s: &Settings, variant: &str, rate: f64, seed: u64) -> Result<EventSeries> {
    let window = (0.0, s.day_length);
    if variant == "hawkes" {
        let params = HawkesParams::new(
            (1.0 - s.hawkes_n) * rate,
            s.hawkes_n,
            KernelSpec::Exponential { tau: s.hawkes_tau },
        );
        Ok(simulate_branching(&params, window, seed, DEFAULT_CAP)?)
    } else {
        let profile = BackgroundProfile::constant(0.0, s.day_length, rate)?;
        Ok(simulate_poisson(&profile, window, seed)?)
    }
}

pub fn run(s: &Settings) -> Result<ExperimentOutput> {
    let c = &s.common;
    let jobs: Vec<(usize, usize)> = (0..s.variants.len())
        .flat_map(|v| (0..c.realizations).map(move |b| (v, b)))
        .collect();
    let per_job = par_collect(jobs.len(), |j| {
        let (v, b) = jobs[j];
        let variant = s.variants[v].as_str();
        let seed = c.seed(b);
        let rates = s.daily_rates(seed)?;
        let mut days = Vec::with_capacity(s.days);
        for (i, &rate) in rates.iter().enumerate() {
            if variant == "poisson_dropped" && rate < s.drop_below * s.median_rate {
                continue;
            }
            let rate = if variant == "constant" { s.median_rate } else { rate };
            let tag = if variant == "hawkes" { 20_000 } else { 10_000 };
            days.push(day(s, variant, rate, stream(seed, tag + i as u64))?);
        }
        if days.is_empty() {
            return Err(ExperimentError::Invalid(format!("block {b} has no day left after dropping")));
        }
        let block = concatenate(&days, 0.0)?;
        let fit = checked_fit(&block, &KernelFamily::approx_power_law(), &c.fit)?;
        Ok(Estimate::from_fit(variant, b as f64, b, seed, &fit))
    })?;
    let mut rates = Table::new("daily_rates", &["block", "day", "rate"]);
    for b in 0..c.realizations {
        for (i, r) in s.daily_rates(c.seed(b))?.iter().enumerate() {
            rates.push(vec![b.to_string(), i.to_string(), cell(*r)]);
        }
    }
    let mut summary = Table::new("summary", &["variant", "blocks", "mean_n", "std_n", "mean_epsilon", "supercritical"]);
    for variant in &s.variants {
        let est: Vec<&Estimate> = per_job.iter().filter(|e| &e.case == variant).collect();
        let n: Vec<f64> = est.iter().map(|e| e.n_hat).collect();
        let eps: Vec<f64> = est.iter().map(|e| e.psi2).collect();
        summary.push(vec![
            variant.clone(),
            est.len().to_string(),
            cell(super::mean(&n)),
            cell(super::sample_std(&n)),
            cell(super::mean(&eps)),
            n.iter().filter(|&&x| x > 1.0).count().to_string(),
        ]);
    }
    Ok(ExperimentOutput {
        id: "poisson_criticality".into(),
        sweep: Some(SweepResult::from_estimates("poisson_criticality", "block", c.realizations, per_job)),
        tables: vec![summary, rates],
        settings: settings_json(s),
        flags: Vec::new(),
    })
}
