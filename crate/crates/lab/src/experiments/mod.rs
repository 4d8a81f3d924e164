//! Monte Carlo bias studies of the branching-ratio estimator.
//!
//! Each experiment reads its settings from a [`Config`], runs `R`
//! realizations on the rayon pool and returns an [`ExperimentOutput`]: a
//! [`SweepResult`] with one row per `(case, x)` plus any auxiliary tables.
//! Realization `r` uses seed `seed_base + r`; sub-streams (outlier positions,
//! randomization, daily draws) are derived from it with [`stream`], so the
//! output is a pure function of the configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hawkes_core::calibrate::{self, MultiStartConfig};
use hawkes_core::simulate::{burn, simulate_branching, DEFAULT_CAP};
use hawkes_core::{EventSeries, FitResult, HawkesParams, KernelFamily, KernelSpec};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::manifest::VERSION;

pub mod bundling;
pub mod edge_effect;
pub mod kernel_misspec;
pub mod outlier_bias;
pub mod poisson_criticality;
pub mod quantile_table;
pub mod regime_shift;
pub mod residual_size;

pub const EXPERIMENTS: &[&str] = &[
    "outlier_bias",
    "kernel_misspec",
    "edge_effect",
    "bundling",
    "regime_shift",
    "poisson_criticality",
    "quantile_table",
    "residual_size",
];

/// Largest tolerated `|μ̂T + n̂H1 - N| / N` on any fit.
pub const STATIONARITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] hawkes_core::Error),
    #[error("unknown experiment `{0}`; expected one of {EXPERIMENTS:?}")]
    Unknown(String),
    #[error("invalid setting: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Format(#[from] crate::io::FormatError),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

/// Full-size defaults an experiment hands to [`Common::from_config`].
#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub realizations: usize,
    pub window: f64,
    pub burn_in: f64,
    pub scale: f64,
}

/// Settings shared by every experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Common {
    pub realizations: usize,
    pub window: f64,
    /// Nominal burn-in before scaling.
    pub burn_in: f64,
    pub scale: f64,
    pub burn_cap: f64,
    pub seed_base: u64,
    pub fit: MultiStartConfig,
}

impl Common {
    pub fn from_config(cfg: &Config, d: Defaults) -> Result<Self> {
        let common = Common {
            realizations: cfg.get_or("realizations", d.realizations)?,
            window: cfg.get_or("window", d.window)?,
            burn_in: cfg.get_or("burn_in", d.burn_in)?,
            scale: cfg.get_or("scale", d.scale)?,
            burn_cap: cfg.get_or("burn_cap", 1e6)?,
            seed_base: cfg.get_or("seed_base", 1)?,
            fit: fit_config(cfg)?,
        };
        if common.realizations == 0 {
            return Err(ExperimentError::Invalid("realizations must be at least 1".into()));
        }
        if !(common.scale > 0.0 && common.scale <= 1.0) {
            return Err(ExperimentError::Invalid(format!("scale must lie in (0, 1], got {}", common.scale)));
        }
        if !(common.window > 0.0 && common.burn_in >= 0.0 && common.burn_cap >= 0.0) {
            return Err(ExperimentError::Invalid("window must be positive and burn-in nonnegative".into()));
        }
        Ok(common)
    }

    /// Burn-in actually simulated: `burn_in × scale`, capped.
    pub fn effective_burn(&self) -> f64 {
        (self.burn_in * self.scale).min(self.burn_cap)
    }

    pub fn seed(&self, realization: usize) -> u64 {
        self.seed_base.wrapping_add(realization as u64)
    }
}

/// Fit settings under the `fit.` prefix. Experiments refine only the best
/// scored grid start unless `fit.refine_best = 0` asks for all of them.
pub fn fit_config(cfg: &Config) -> Result<MultiStartConfig> {
    let d = MultiStartConfig::default();
    let refine: usize = cfg.get_or("fit.refine_best", 1)?;
    Ok(MultiStartConfig {
        grid: (cfg.get_or("fit.grid_time", d.grid.0)?, cfg.get_or("fit.grid_exponent", d.grid.1)?),
        time_scale_bounds: (
            cfg.get_or("fit.time_min", d.time_scale_bounds.0)?,
            cfg.get_or("fit.time_max", d.time_scale_bounds.1)?,
        ),
        exponent_bounds: (
            cfg.get_or("fit.exponent_min", d.exponent_bounds.0)?,
            cfg.get_or("fit.exponent_max", d.exponent_bounds.1)?,
        ),
        max_iter: cfg.get_or("fit.max_iter", d.max_iter)?,
        xtol: cfg.get_or("fit.xtol", d.xtol)?,
        refine_best: (refine > 0).then_some(refine),
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent sub-seed `tag` of a realization seed.
pub fn stream(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5DEE_CE66)))
}

/// Stationary-regime sample: simulate `burn + window` and keep the tail,
/// re-origined to `(0, window]`.
pub fn simulate_stationary(params: &HawkesParams, window: f64, burn_in: f64, seed: u64) -> Result<EventSeries> {
    let s = simulate_branching(params, (0.0, burn_in + window), seed, DEFAULT_CAP)?;
    Ok(burn(&s, burn_in, true))
}

/// Warning text when the burn-in is shorter than the kernel's `T_0.99`.
pub fn burn_flag(label: &str, spec: &KernelSpec, burn_in: f64) -> Option<String> {
    let t99 = spec.build().ok()?.characteristic_time(0.99).ok()?;
    (t99 > burn_in).then(|| format!("under-burned: {label} has T_0.99 = {t99:.3e} s > burn-in {burn_in:.3e} s"))
}

/// Fit with the stationarity relation enforced.
///
/// # Panics
/// When `|μ̂T + n̂H1 - N| > 1e-6·N`, which would mean the profile solver is broken.
pub fn checked_fit(series: &EventSeries, family: &KernelFamily, config: &MultiStartConfig) -> Result<FitResult> {
    let fit = calibrate::fit(series, family, config)?;
    let residual = fit.stationarity_residual();
    assert!(
        residual <= STATIONARITY_TOLERANCE,
        "stationarity relation violated: |muT + nH1 - N|/N = {residual:e} ({} events, {:?})",
        fit.n_events,
        fit.kernel
    );
    Ok(fit)
}

/// Runs `f` over `0..count` on the rayon pool; results keep index order.
pub fn par_collect<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(f).collect()
}

/// One calibrated realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub case: String,
    pub x: f64,
    pub realization: usize,
    pub seed: u64,
    pub events: usize,
    pub mu_hat: f64,
    pub n_hat: f64,
    /// Fitted time scale (τ, c or τ0).
    pub psi1: f64,
    /// Fitted exponent (θ or ε); NaN for the exponential kernel.
    pub psi2: f64,
    pub neg_log_lik: f64,
    pub stationarity: f64,
    /// Residual test p-values; NaN unless the experiment runs them.
    pub ks_pvalue: f64,
    pub lb_pvalue: f64,
}

impl Estimate {
    pub fn from_fit(case: &str, x: f64, realization: usize, seed: u64, fit: &FitResult) -> Self {
        let (psi1, psi2) = kernel_params(&fit.kernel);
        Estimate {
            case: case.to_string(),
            x,
            realization,
            seed,
            events: fit.n_events,
            mu_hat: fit.mu_hat,
            n_hat: fit.n_hat,
            psi1,
            psi2,
            neg_log_lik: fit.neg_log_lik,
            stationarity: fit.stationarity_residual(),
            ks_pvalue: f64::NAN,
            lb_pvalue: f64::NAN,
        }
    }
}

pub fn kernel_params(spec: &KernelSpec) -> (f64, f64) {
    match *spec {
        KernelSpec::Exponential { tau } => (tau, f64::NAN),
        KernelSpec::Omori { c, theta } => (c, theta),
        KernelSpec::CutoffPowerLaw { tau0, epsilon } | KernelSpec::ApproxPowerLaw { tau0, epsilon, .. } => {
            (tau0, epsilon)
        }
    }
}

/// Aggregate over the realizations of one `(case, x)` point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub case: String,
    pub x: f64,
    pub count: usize,
    pub mean_n: f64,
    /// Sample standard deviation; 0 for a single realization.
    pub std_n: f64,
    pub mean_mu: f64,
    pub mean_psi1: f64,
    pub mean_psi2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub experiment: String,
    pub axis: String,
    pub realizations: usize,
    pub rows: Vec<SweepRow>,
    pub estimates: Vec<Estimate>,
    pub max_stationarity_residual: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl SweepResult {
    /// Groups estimates by `(case, x)` in order of first appearance.
    pub fn from_estimates(experiment: &str, axis: &str, realizations: usize, estimates: Vec<Estimate>) -> Self {
        let mut keys: Vec<(String, f64)> = Vec::new();
        for e in &estimates {
            if !keys.iter().any(|(c, x)| *c == e.case && x.to_bits() == e.x.to_bits()) {
                keys.push((e.case.clone(), e.x));
            }
        }
        let rows = keys
            .into_iter()
            .map(|(case, x)| {
                let group: Vec<&Estimate> = estimates
                    .iter()
                    .filter(|e| e.case == case && e.x.to_bits() == x.to_bits())
                    .collect();
                let col = |f: fn(&Estimate) -> f64| -> Vec<f64> { group.iter().map(|e| f(e)).collect() };
                let n = col(|e| e.n_hat);
                SweepRow {
                    count: group.len(),
                    mean_n: mean(&n),
                    std_n: sample_std(&n),
                    mean_mu: mean(&col(|e| e.mu_hat)),
                    mean_psi1: mean(&col(|e| e.psi1)),
                    mean_psi2: mean(&col(|e| e.psi2)),
                    case,
                    x,
                }
            })
            .collect();
        let max_stationarity_residual = estimates.iter().map(|e| e.stationarity).fold(0.0, f64::max);
        SweepResult {
            experiment: experiment.to_string(),
            axis: axis.to_string(),
            realizations,
            rows,
            estimates,
            max_stationarity_residual,
        }
    }

    pub fn row(&self, case: &str, x: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.case == case && (r.x - x).abs() <= 1e-12 * x.abs().max(1.0))
    }

    pub fn case(&self, case: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.case == case).collect()
    }
}

/// A named table written as `<experiment>_<name>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric cell, NaN when missing or unparsable.
    pub fn value(&self, row: usize, column: &str) -> f64 {
        self.column(column)
            .and_then(|c| self.rows.get(row)?.get(c)?.parse().ok())
            .unwrap_or(f64::NAN)
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cell text: shortest representation that parses back exactly.
pub fn cell(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub id: String,
    pub sweep: Option<SweepResult>,
    pub tables: Vec<Table>,
    /// Resolved settings echoed into the metadata sidecar.
    pub settings: serde_json::Value,
    /// Caveats such as under-burned configurations.
    pub flags: Vec<String>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `<id>.csv`, `<id>_estimates.csv`, one CSV per extra table and
    /// the `<id>.meta.json` sidecar. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if let Some(sweep) = &self.sweep {
            let path = dir.join(format!("{}.csv", self.id));
            let mut w = csv::Writer::from_path(&path)?;
            for row in &sweep.rows {
                w.serialize(row)?;
            }
            w.flush()?;
            written.push(path);
            let path = dir.join(format!("{}_estimates.csv", self.id));
            let mut w = csv::Writer::from_path(&path)?;
            for e in &sweep.estimates {
                w.serialize(e)?;
            }
            w.flush()?;
            written.push(path);
        }
        for table in &self.tables {
            let path = dir.join(format!("{}_{}.csv", self.id, table.name));
            table.write(&path)?;
            written.push(path);
        }
        let meta = Metadata {
            experiment: &self.id,
            version: VERSION,
            seeds: "realization r uses seed_base + r",
            settings: &self.settings,
            flags: &self.flags,
            realizations: self.sweep.as_ref().map(|s| s.realizations),
            max_stationarity_residual: self.sweep.as_ref().map(|s| s.max_stationarity_residual),
            files: written
                .iter()
                .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
                .collect(),
        };
        let path = dir.join(format!("{}.meta.json", self.id));
        crate::io::save_json(&path, &meta)?;
        written.push(path);
        Ok(written)
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    experiment: &'a str,
    version: &'a str,
    seeds: &'a str,
    settings: &'a serde_json::Value,
    flags: &'a [String],
    realizations: Option<usize>,
    max_stationarity_residual: Option<f64>,
    files: Vec<String>,
}

pub(crate) fn settings_json<T: Serialize>(settings: &T) -> serde_json::Value {
    serde_json::to_value(settings).unwrap_or(serde_json::Value::Null)
}

/// Runs experiment `id`.
pub fn run(id: &str, cfg: &Config) -> Result<ExperimentOutput> {
    log::info!("experiment {id}");
    match id {
        "outlier_bias" => outlier_bias::run(&outlier_bias::Settings::from_config(cfg)?),
        "kernel_misspec" => kernel_misspec::run(&kernel_misspec::Settings::from_config(cfg)?),
        "edge_effect" => edge_effect::run(&edge_effect::Settings::from_config(cfg)?),
        "bundling" => bundling::run(&bundling::Settings::from_config(cfg)?),
        "regime_shift" => regime_shift::run(&regime_shift::Settings::from_config(cfg)?),
        "poisson_criticality" => poisson_criticality::run(&poisson_criticality::Settings::from_config(cfg)?),
        "quantile_table" => quantile_table::run(&quantile_table::Settings::from_config(cfg)?),
        "residual_size" => residual_size::run(&residual_size::Settings::from_config(cfg)?),
        other => Err(ExperimentError::Unknown(other.to_string())),
    }
}

/// Mean n̂ at two scale factors for every sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub case: String,
    pub x: f64,
    pub scale_a: f64,
    pub mean_a: f64,
    pub scale_b: f64,
    pub mean_b: f64,
    /// `2·sqrt(s_a²/R_a + s_b²/R_b)`.
    pub band: f64,
    pub flagged: bool,
}

pub fn scale_audit(id: &str, cfg: &Config, scales: (f64, f64)) -> Result<Vec<AuditRow>> {
    let at = |scale: f64| -> Result<SweepResult> {
        let mut c = cfg.clone();
        c.set("scale", &scale.to_string());
        run(id, &c)?
            .sweep
            .ok_or_else(|| ExperimentError::Invalid(format!("{id} has no sweep to audit")))
    };
    let (a, b) = (at(scales.0)?, at(scales.1)?);
    let rows = a
        .rows
        .iter()
        .filter_map(|ra| {
            let rb = b.row(&ra.case, ra.x)?;
            let band = 2.0
                * (ra.std_n.powi(2) / ra.count as f64 + rb.std_n.powi(2) / rb.count as f64).sqrt();
            Some(AuditRow {
                case: ra.case.clone(),
                x: ra.x,
                scale_a: scales.0,
                mean_a: ra.mean_n,
                scale_b: scales.1,
                mean_b: rb.mean_n,
                band,
                flagged: (ra.mean_n - rb.mean_n).abs() > band,
            })
        })
        .collect();
    Ok(rows)
}

pub fn write_audit(path: &Path, rows: &[AuditRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Location of the sharpest convex kink of `y(x)`: the point with the largest
/// positive divided second difference whose left neighbour's second
/// difference is negative. `xs` must be increasing.
pub fn detect_cusp(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 4 || xs.len() != ys.len() {
        return None;
    }
    let d2: Vec<f64> = (1..xs.len() - 1)
        .map(|j| {
            let left = (ys[j] - ys[j - 1]) / (xs[j] - xs[j - 1]);
            let right = (ys[j + 1] - ys[j]) / (xs[j + 1] - xs[j]);
            2.0 * (right - left) / (xs[j + 1] - xs[j - 1])
        })
        .collect();
    (1..d2.len())
        .filter(|&k| d2[k - 1] < 0.0 && d2[k] > 0.0)
        .max_by(|&a, &b| d2[a].total_cmp(&d2[b]))
        .map(|k| xs[k + 1])
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn parse_family(name: &str) -> Result<KernelFamily> {
    match name {
        "exponential" | "exp" => Ok(KernelFamily::Exponential),
        "omori" => Ok(KernelFamily::Omori),
        "approx_power_law" | "approx_pl" | "apl" => Ok(KernelFamily::approx_power_law()),
        other => Err(ExperimentError::Invalid(format!("unknown kernel family `{other}`"))),
    }
}

pub(crate) fn metadata_map(settings: &serde_json::Value) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    flatten("", settings, &mut out);
    out
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cusp_at_a_kink() {
        let xs: Vec<f64> = (1..=9).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| if x < 0.5 { 1.0 - x * x } else { 0.75 }).collect();
        assert_eq!(detect_cusp(&xs, &ys), Some(xs[4]));
        let line: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        assert_eq!(detect_cusp(&xs, &line), None);
    }

    #[test]
    fn rows_group_by_case_and_point() {
        let e = |case: &str, x: f64, n: f64| Estimate {
            case: case.into(),
            x,
            realization: 0,
            seed: 0,
            events: 10,
            mu_hat: 1.0,
            n_hat: n,
            psi1: 1.0,
            psi2: f64::NAN,
            neg_log_lik: 0.0,
            stationarity: 1e-12,
            ks_pvalue: f64::NAN,
            lb_pvalue: f64::NAN,
        };
        let s = SweepResult::from_estimates(
            "t",
            "x",
            2,
            vec![e("a", 1.0, 0.2), e("b", 1.0, 0.9), e("a", 1.0, 0.4), e("a", 2.0, 0.5)],
        );
        assert_eq!(s.rows.len(), 3);
        let r = s.row("a", 1.0).unwrap();
        assert_eq!(r.count, 2);
        assert!((r.mean_n - 0.3).abs() < 1e-12);
        assert!((r.std_n - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.row("a", 2.0).unwrap().std_n, 0.0);
        assert!(s.rows.iter().all(|r| r.std_n >= 0.0));
    }

    #[test]
    fn streams_differ() {
        assert_ne!(stream(1, 0), stream(1, 1));
        assert_ne!(stream(1, 0), stream(2, 0));
        assert_eq!(stream(7, 3), stream(7, 3));
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.9), 4.6);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
    }
}
