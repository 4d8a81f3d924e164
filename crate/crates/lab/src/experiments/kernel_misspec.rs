//! Long-memory kernel misspecification.
//!
//! Cases, with `μ = 0.1` and `n` swept:
//! - `i`: power-law surrogate data fitted with an Omori kernel,
//! - `ii`: Omori data fitted with the power-law surrogate,
//! - `iii`: surrogate data fitted with the surrogate.
//!
//! Every `n` reuses the realization seed, so the curves share random numbers.

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
    pub mu: f64,
    pub ns: Vec<f64>,
    pub cases: Vec<String>,
    pub apl_tau0: f64,
    pub apl_epsilon: f64,
    pub omori_c: f64,
    pub omori_theta: f64,
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let defaults = Defaults {
            realizations: 20,
            window: 1e5,
            burn_in: 1e8,
            scale: 0.01,
        };
        let s = Settings {
            common: Common::from_config(cfg, defaults)?,
            mu: cfg.get_or("mu", 0.1)?,
            ns: cfg.list_or("ns", &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])?,
            cases: cfg.list_or("cases", &["i".to_string(), "ii".into(), "iii".into()])?,
            apl_tau0: cfg.get_or("apl.tau0", 1.0)?,
            apl_epsilon: cfg.get_or("apl.epsilon", 0.5)?,
            omori_c: cfg.get_or("omori.c", 1.0)?,
            omori_theta: cfg.get_or("omori.theta", 0.5)?,
        };
        if let Some(bad) = s.cases.iter().find(|c| !["i", "ii", "iii"].contains(&c.as_str())) {
            return Err(ExperimentError::Invalid(format!("unknown misspecification case `{bad}`")));
        }
        Ok(s)
    }

    fn apl(&self) -> KernelSpec {
        KernelSpec::approx_power_law(self.apl_tau0, self.apl_epsilon)
    }

    fn omori(&self) -> KernelSpec {
        KernelSpec::Omori {
            c: self.omori_c,
            theta: self.omori_theta,
        }
    }
}

pub fn run(s: &Settings) -> Result<ExperimentOutput> {
    let c = &s.common;
    let burn_in = c.effective_burn();
    let wants = |case: &str| s.cases.iter().any(|x| x == case);
    let jobs: Vec<(usize, usize)> = (0..s.ns.len())
        .flat_map(|i| (0..c.realizations).map(move |r| (i, r)))
        .collect();
    let per_job = par_collect(jobs.len(), |j| {
        let (i, r) = jobs[j];
        let (n, seed) = (s.ns[i], c.seed(r));
        let mut out = Vec::new();
        if wants("i") || wants("iii") {
            let data = simulate_stationary(&HawkesParams::new(s.mu, n, s.apl()), c.window, burn_in, stream(seed, 1))?;
            for (case, family) in [("i", KernelFamily::Omori), ("iii", KernelFamily::approx_power_law())] {
                if wants(case) {
                    let fit = checked_fit(&data, &family, &c.fit)?;
                    out.push(Estimate::from_fit(case, n, r, seed, &fit));
                }
            }
        }
        if wants("ii") {
            let data = simulate_stationary(&HawkesParams::new(s.mu, n, s.omori()), c.window, burn_in, stream(seed, 2))?;
            let fit = checked_fit(&data, &KernelFamily::approx_power_law(), &c.fit)?;
            out.push(Estimate::from_fit("ii", n, r, seed, &fit));
        }
        Ok(out)
    })?;
    let mut estimates: Vec<Estimate> = per_job.into_iter().flatten().collect();
    // rows grouped case by case
    estimates.sort_by_key(|e| s.cases.iter().position(|c| *c == e.case));
    let flags = [("generator apl", s.apl()), ("generator omori", s.omori())]
        .iter()
        .filter_map(|(label, spec)| burn_flag(label, spec, burn_in))
        .collect();
    Ok(ExperimentOutput {
        id: "kernel_misspec".into(),
        sweep: Some(SweepResult::from_estimates("kernel_misspec", "n", c.realizations, estimates)),
        tables: Vec::new(),
        settings: settings_json(s),
        flags,
    })
}
