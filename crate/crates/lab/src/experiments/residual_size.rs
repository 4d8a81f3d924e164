//! How often the residual tests accept fitted models.
//!
//! Cases:
//! - `true_model`: power-law surrogate Hawkes data fitted with its own family,
//! - `regime_poisson`: concatenated Poisson days with lognormal daily rates,
//!   fitted as a Hawkes process although it has no self-excitation.
//!
//! Each run records the KS and Ljung–Box p-values of the residuals at the
//! fitted parameters; the `pass_rates` table counts runs passing both tests.

use hawkes_core::preprocess::concatenate;
use hawkes_core::residuals::residual_report;
use hawkes_core::simulate::{rng_from_seed, simulate_poisson};
use hawkes_core::{BackgroundProfile, HawkesParams, KernelFamily, KernelSpec};
use rand_distr::{Distribution, LogNormal};
use serde::Serialize;

use super::{
    burn_flag, cell, checked_fit, par_collect, settings_json, simulate_stationary, stream, Common, Defaults,
    Estimate, ExperimentError, ExperimentOutput, Result, SweepResult, Table,
};
use crate::config::Config;

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub common: Common,
    pub cases: Vec<String>,
    pub mu: f64,
    pub n: f64,
    pub tau0: f64,
    pub epsilon: f64,
    pub days: usize,
    pub day_length: f64,
    pub median_rate: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Ljung–Box lags; 0 picks the default for the sample size.
    pub lags: usize,
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let defaults = Defaults {
            realizations: 200,
            window: 1e4,
            burn_in: 1e4,
            scale: 1.0,
        };
        let s = Settings {
            common: Common::from_config(cfg, defaults)?,
            cases: cfg.list_or("cases", &["true_model".to_string(), "regime_poisson".into()])?,
            mu: cfg.get_or("mu", 0.5)?,
            n: cfg.get_or("n", 0.5)?,
            tau0: cfg.get_or("tau0", 1.0)?,
            epsilon: cfg.get_or("epsilon", 0.5)?,
            days: cfg.get_or("days", 10)?,
            day_length: cfg.get_or("day_length", 1000.0)?,
            median_rate: cfg.get_or("median_rate", 0.5)?,
            sigma: cfg.get_or("sigma", 0.6)?,
            alpha: cfg.get_or("alpha", 0.05)?,
            lags: cfg.get_or("lags", 0)?,
        };
        if let Some(bad) = s.cases.iter().find(|c| !["true_model", "regime_poisson"].contains(&c.as_str())) {
            return Err(ExperimentError::Invalid(format!("unknown case `{bad}`")));
        }
        Ok(s)
    }

    fn kernel(&self) -> KernelSpec {
        KernelSpec::approx_power_law(self.tau0, self.epsilon)
    }
}

pub fn run(s: &Settings) -> Result<ExperimentOutput> {
    let c = &s.common;
    let burn_in = c.effective_burn();
    let jobs: Vec<(usize, usize)> = (0..s.cases.len())
        .flat_map(|k| (0..c.realizations).map(move |r| (k, r)))
        .collect();
    let family = KernelFamily::approx_power_law();
    let per_job = par_collect(jobs.len(), |j| {
        let (k, r) = jobs[j];
        let case = s.cases[k].as_str();
        let seed = c.seed(r);
        let data = if case == "true_model" {
            simulate_stationary(&HawkesParams::new(s.mu, s.n, s.kernel()), c.window, burn_in, stream(seed, 1))?
        } else {
            let law = LogNormal::new(s.median_rate.ln(), s.sigma)
                .map_err(|e| ExperimentError::Invalid(format!("lognormal: {e}")))?;
            let mut rng = rng_from_seed(stream(seed, 2));
            let days = (0..s.days)
                .map(|i| {
                    let profile = BackgroundProfile::constant(0.0, s.day_length, law.sample(&mut rng))?;
                    simulate_poisson(&profile, (0.0, s.day_length), stream(seed, 100 + i as u64))
                })
                .collect::<hawkes_core::Result<Vec<_>>>()?;
            concatenate(&days, 0.0)?
        };
        let fit = checked_fit(&data, &family, &c.fit)?;
        let params = HawkesParams::new(fit.mu_hat, fit.n_hat, fit.kernel);
        let report = residual_report(&data, &params, (s.lags > 0).then_some(s.lags))?;
        let mut e = Estimate::from_fit(case, 0.0, r, seed, &fit);
        e.ks_pvalue = report.ks_pvalue;
        e.lb_pvalue = report.lb_pvalue;
        Ok(e)
    })?;
    let mut table = Table::new("pass_rates", &["case", "runs", "passes", "pass_rate", "mean_n"]);
    for case in &s.cases {
        let est: Vec<&Estimate> = per_job.iter().filter(|e| &e.case == case).collect();
        let passes = est
            .iter()
            .filter(|e| e.ks_pvalue >= s.alpha && e.lb_pvalue >= s.alpha)
            .count();
        table.push(vec![
            case.clone(),
            est.len().to_string(),
            passes.to_string(),
            cell(passes as f64 / est.len() as f64),
            cell(est.iter().map(|e| e.n_hat).sum::<f64>() / est.len() as f64),
        ]);
    }
    let flags = burn_flag("true model", &s.kernel(), burn_in).into_iter().collect();
    Ok(ExperimentOutput {
        id: "residual_size".into(),
        sweep: Some(SweepResult::from_estimates("residual_size", "none", c.realizations, per_job)),
        tables: vec![table],
        settings: settings_json(s),
        flags,
    })
}
