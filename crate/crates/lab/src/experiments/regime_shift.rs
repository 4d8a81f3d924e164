//! Two stationary regimes joined end to end and fitted as one process.
//!
//! The first regime is `(μ1, n1)`. Panel `n2` changes only the branching
//! ratio of the second regime, panel `mu2` only its background rate. Both
//! concatenation orders are fitted: `forward` is first then second,
//! `reverse` the opposite. Cases are `<panel>/<order>`.

use hawkes_core::preprocess::concatenate;
use hawkes_core::{HawkesParams, KernelFamily, KernelSpec};
use serde::Serialize;

use super::{
    burn_flag, checked_fit, par_collect, settings_json, simulate_stationary, stream, Common, Defaults, Estimate,
    ExperimentError, ExperimentOutput, Result, SweepResult,
};
use crate::config::Config;

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub common: Common,
    pub tau0: f64,
    pub epsilon: f64,
    pub mu1: f64,
    pub n1: f64,
    pub panels: Vec<String>,
    pub orders: Vec<String>,
    pub n2_values: Vec<f64>,
    pub mu2_values: Vec<f64>,
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let defaults = Defaults {
            realizations: 20,
            window: 1e5,
            burn_in: 1e6,
            scale: 0.1,
        };
        let s = Settings {
            common: Common::from_config(cfg, defaults)?,
            tau0: cfg.get_or("tau0", 1.0)?,
            epsilon: cfg.get_or("epsilon", 1.0)?,
            mu1: cfg.get_or("mu1", 1.0)?,
            n1: cfg.get_or("n1", 0.5)?,
            panels: cfg.list_or("panels", &["n2".to_string(), "mu2".into()])?,
            orders: cfg.list_or("orders", &["forward".to_string(), "reverse".into()])?,
            n2_values: cfg.list_or(
                "n2_values",
                &[0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
            )?,
            mu2_values: cfg.list_or(
                "mu2_values",
                &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
            )?,
        };
        if let Some(bad) = s.panels.iter().find(|p| !["n2", "mu2"].contains(&p.as_str())) {
            return Err(ExperimentError::Invalid(format!("unknown panel `{bad}`")));
        }
        if let Some(bad) = s.orders.iter().find(|o| !["forward", "reverse"].contains(&o.as_str())) {
            return Err(ExperimentError::Invalid(format!("unknown order `{bad}`")));
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
    let mut points: Vec<(&str, f64)> = Vec::new();
    for panel in &s.panels {
        let values = if panel == "n2" { &s.n2_values } else { &s.mu2_values };
        points.extend(values.iter().map(|&v| (panel.as_str(), v)));
    }
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..c.realizations).map(move |r| (p, r)))
        .collect();
    let per_job = par_collect(jobs.len(), |j| {
        let (p, r) = jobs[j];
        let (panel, x) = points[p];
        let seed = c.seed(r);
        let (mu2, n2) = if panel == "n2" { (s.mu1, x) } else { (x, s.n1) };
        let first = simulate_stationary(&HawkesParams::new(s.mu1, s.n1, s.kernel()), c.window, burn_in, stream(seed, 1))?;
        let second = simulate_stationary(&HawkesParams::new(mu2, n2, s.kernel()), c.window, burn_in, stream(seed, 2))?;
        let mut out = Vec::new();
        for order in &s.orders {
            let joined = if order == "forward" {
                concatenate(&[first.clone(), second.clone()], 0.0)?
            } else {
                concatenate(&[second.clone(), first.clone()], 0.0)?
            };
            let fit = checked_fit(&joined, &KernelFamily::approx_power_law(), &c.fit)?;
            out.push(Estimate::from_fit(&format!("{panel}/{order}"), x, r, seed, &fit));
        }
        Ok(out)
    })?;
    let mut estimates: Vec<Estimate> = per_job.into_iter().flatten().collect();
    let case_rank = |case: &str| -> usize {
        let (panel, order) = case.split_once('/').unwrap_or((case, ""));
        let p = s.panels.iter().position(|x| x == panel).unwrap_or(0);
        let o = s.orders.iter().position(|x| x == order).unwrap_or(0);
        p * s.orders.len() + o
    };
    estimates.sort_by_key(|e| case_rank(&e.case));
    let flags = burn_flag("generator", &s.kernel(), burn_in).into_iter().collect();
    Ok(ExperimentOutput {
        id: "regime_shift".into(),
        sweep: Some(SweepResult::from_estimates("regime_shift", "second_regime", c.realizations, estimates)),
        tables: Vec::new(),
        settings: settings_json(s),
        flags,
    })
}
