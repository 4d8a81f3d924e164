//! Branching ratio under a small fraction of inflated inter-event durations.
//!
//! Each kernel generates `μ = 0.3, n = 0.7` data; outliers of size
//! `M × max duration` are injected at every `(M, fraction)` pair and the data
//! are refitted with the generating family. Cases are `<family>/M=<M>`, the
//! axis is the outlier fraction.

use hawkes_core::preprocess::inject_outliers;
use hawkes_core::{HawkesParams, KernelFamily, KernelSpec};
use serde::Serialize;

use super::{
    burn_flag, checked_fit, par_collect, parse_family, settings_json, simulate_stationary, stream, Common, Defaults,
    Estimate, ExperimentOutput, Result, SweepResult,
};
use crate::config::Config;

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub common: Common,
    pub mu: f64,
    pub n: f64,
    pub kernels: Vec<String>,
    pub exp_tau: f64,
    pub omori_c: f64,
    pub omori_theta: f64,
    pub apl_tau0: f64,
    pub apl_epsilon: f64,
    pub fractions: Vec<f64>,
    pub multipliers: Vec<f64>,
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let defaults = Defaults {
            realizations: 20,
            window: 1e5,
            burn_in: 1e5,
            scale: 1.0,
        };
        Ok(Settings {
            common: Common::from_config(cfg, defaults)?,
            mu: cfg.get_or("mu", 0.3)?,
            n: cfg.get_or("n", 0.7)?,
            kernels: cfg.list_or(
                "kernels",
                &["exponential".to_string(), "omori".into(), "approx_power_law".into()],
            )?,
            exp_tau: cfg.get_or("exp.tau", 0.1)?,
            omori_c: cfg.get_or("omori.c", 0.1)?,
            omori_theta: cfg.get_or("omori.theta", 0.5)?,
            apl_tau0: cfg.get_or("apl.tau0", 0.1)?,
            apl_epsilon: cfg.get_or("apl.epsilon", 0.5)?,
            fractions: cfg.list_or("fractions", &[0.0, 0.0017, 0.005, 0.01, 0.02])?,
            multipliers: cfg.list_or("multipliers", &[1.0, 2.0, 5.0])?,
        })
    }

    fn generator(&self, family: &KernelFamily) -> KernelSpec {
        match family {
            KernelFamily::Exponential => KernelSpec::Exponential { tau: self.exp_tau },
            KernelFamily::Omori => KernelSpec::Omori {
                c: self.omori_c,
                theta: self.omori_theta,
            },
            KernelFamily::ApproxPowerLaw { .. } => KernelSpec::approx_power_law(self.apl_tau0, self.apl_epsilon),
        }
    }
}

pub fn run(s: &Settings) -> Result<ExperimentOutput> {
    let c = &s.common;
    let families = s
        .kernels
        .iter()
        .map(|k| parse_family(k))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..families.len())
        .flat_map(|k| (0..c.realizations).map(move |r| (k, r)))
        .collect();
    let per_job = par_collect(jobs.len(), |j| {
        let (k, r) = jobs[j];
        let family = &families[k];
        let seed = c.seed(r);
        let params = HawkesParams::new(s.mu, s.n, s.generator(family));
        let clean = simulate_stationary(&params, c.window, c.effective_burn(), stream(seed, k as u64))?;
        let clean_fit = if s.fractions.contains(&0.0) {
            Some(checked_fit(&clean, family, &c.fit)?)
        } else {
            None
        };
        let mut out = Vec::new();
        for (mi, &m) in s.multipliers.iter().enumerate() {
            let case = format!("{}/M={m}", family.name());
            for (fi, &fraction) in s.fractions.iter().enumerate() {
                let fit = if let (0.0, Some(clean_fit)) = (fraction, &clean_fit) {
                    clean_fit.clone()
                } else {
                    let tag = 1000 + 100 * mi as u64 + fi as u64;
                    let dirty = inject_outliers(&clean, fraction, m, stream(seed, tag))?;
                    checked_fit(&dirty, family, &c.fit)?
                };
                out.push(Estimate::from_fit(&case, fraction, r, seed, &fit));
            }
        }
        Ok(out)
    })?;
    let estimates = per_job.into_iter().flatten().collect();
    let flags = families
        .iter()
        .filter_map(|f| burn_flag(f.name(), &s.generator(f), c.effective_burn()))
        .collect();
    Ok(ExperimentOutput {
        id: "outlier_bias".into(),
        sweep: Some(SweepResult::from_estimates("outlier_bias", "fraction", c.realizations, estimates)),
        tables: Vec::new(),
        settings: settings_json(s),
        flags,
    })
}
