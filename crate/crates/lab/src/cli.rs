//! The `hawkes` command line.
//!
//! Exit codes: 0 on success, 1 for usage and input errors, 2 for numerical
//! failures (no admissible fit, truncated simulation, non-positive
//! intensity, degenerate profile). Diagnostics go to standard error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use hawkes_core::calibrate::{cost_surface, Axis};
use hawkes_core::preprocess::{self, BundleEdge};
use hawkes_core::residuals::residual_report;
use hawkes_core::simulate::{burn, simulate_branching, simulate_thinning, DEFAULT_CAP};
use hawkes_core::{BackgroundProfile, EventSeries, HawkesParams, KernelFamily, KernelSpec, MultiStartConfig};
use serde::Serialize;

use crate::config::Config;
use crate::experiments::{self, ExperimentError};
use crate::io::{self as fio, FormatError, ReadOptions};
use crate::manifest::{manifest_path_for, RunManifest};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "HAWKES_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "hawkes", version, about = "Simulate, calibrate and stress-test Hawkes processes")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Directory for outputs without an explicit path.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Simulate a Hawkes process and write the event series.
    Simulate(SimulateArgs),
    /// Fit a kernel family by multi-start maximum likelihood.
    Fit(FitArgs),
    /// Time-rescaling residuals and goodness-of-fit tests.
    Residuals(ResidualArgs),
    /// Preprocessing transforms on series files.
    Transform {
        #[command(subcommand)]
        op: TransformOp,
    },
    /// Profile cost on a (time-scale, exponent) grid, as CSV.
    Surface(SurfaceArgs),
    /// Run a bias experiment.
    Experiment(ExperimentArgs),
    /// Re-run the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelArg {
    #[value(alias = "exponential")]
    Exp,
    Omori,
    #[value(alias = "cutoff_power_law")]
    Cutoff,
    #[value(name = "approx_pl", alias = "approx_power_law", alias = "apl", alias = "approx-pl")]
    ApproxPl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Branching,
    Thinning,
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct KernelParams {
    /// Exponential time scale.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Omori time offset.
    #[arg(long)]
    pub c: Option<f64>,
    /// Omori exponent.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Power-law time scale.
    #[arg(long)]
    pub tau0: Option<f64>,
    /// Power-law exponent.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Exponentials in the power-law surrogate.
    #[arg(long, default_value_t = 15)]
    pub terms: usize,
    /// Scale ratio between successive surrogate terms.
    #[arg(long, default_value_t = 5.0)]
    pub ratio: f64,
}

impl KernelParams {
    fn spec(&self, kernel: KernelArg) -> anyhow::Result<KernelSpec> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| anyhow!("--{name} is required for this kernel"));
        Ok(match kernel {
            KernelArg::Exp => KernelSpec::Exponential { tau: need(self.tau, "tau")? },
            KernelArg::Omori => KernelSpec::Omori {
                c: need(self.c, "c")?,
                theta: need(self.theta, "theta")?,
            },
            KernelArg::Cutoff => KernelSpec::CutoffPowerLaw {
                tau0: need(self.tau0, "tau0")?,
                epsilon: need(self.epsilon, "epsilon")?,
            },
            KernelArg::ApproxPl => KernelSpec::ApproxPowerLaw {
                tau0: need(self.tau0, "tau0")?,
                epsilon: need(self.epsilon, "epsilon")?,
                terms: self.terms,
                ratio: self.ratio,
            },
        })
    }
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kernel: KernelArg,
    #[command(flatten)]
    pub params: KernelParams,
    /// Constant background rate.
    #[arg(long, required_unless_present = "profile")]
    pub mu: Option<f64>,
    /// Intensity profile CSV, repeated periodically as the background.
    #[arg(long, conflicts_with = "mu")]
    pub profile: Option<PathBuf>,
    /// Branching ratio.
    #[arg(long, default_value_t = 0.0)]
    pub n: f64,
    /// Length of the kept window, after burn-in.
    #[arg(long = "T")]
    pub horizon: f64,
    /// Discarded initial interval.
    #[arg(long, default_value_t = 0.0)]
    pub burn: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Branching)]
    pub method: Method,
    /// Event cap; exceeding it is a numerical failure.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: usize,
    /// Output file (`.csv` for the CSV variant, `-` for stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    #[value(alias = "exponential")]
    Exp,
    Omori,
    #[value(name = "approx_pl", alias = "approx_power_law", alias = "apl", alias = "approx-pl")]
    ApproxPl,
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kernel: FamilyArg,
    /// Total grid starts (a perfect square for two-parameter families).
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    pub time_min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub time_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub exponent_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub exponent_max: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub xtol: f64,
    /// Refine only the best-scored starts.
    #[arg(long)]
    pub refine_best: Option<usize>,
    #[arg(long, default_value_t = 15)]
    pub terms: usize,
    #[arg(long, default_value_t = 5.0)]
    pub ratio: f64,
    #[arg(long)]
    pub allow_ties: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl FitArgs {
    fn family(&self) -> KernelFamily {
        family_of(self.kernel, self.terms, self.ratio)
    }

    fn config(&self) -> anyhow::Result<MultiStartConfig> {
        let family = self.family();
        let grid = match (self.starts, family.dimension()) {
            (None, 1) => (MultiStartConfig::default().grid.0, 1),
            (None, _) => MultiStartConfig::default().grid,
            (Some(k), 1) => (k, 1),
            (Some(k), _) => {
                let side = (k as f64).sqrt().round() as usize;
                if side * side != k {
                    bail!("--starts {k} is not a perfect square; two-parameter families use a square grid");
                }
                (side, side)
            }
        };
        if grid.0 == 0 || grid.1 == 0 {
            bail!("--starts must be positive");
        }
        Ok(MultiStartConfig {
            grid,
            time_scale_bounds: (self.time_min, self.time_max),
            exponent_bounds: (self.exponent_min, self.exponent_max),
            max_iter: self.max_iter,
            xtol: self.xtol,
            refine_best: self.refine_best,
        })
    }
}

fn family_of(kernel: FamilyArg, terms: usize, ratio: f64) -> KernelFamily {
    match kernel {
        FamilyArg::Exp => KernelFamily::Exponential,
        FamilyArg::Omori => KernelFamily::Omori,
        FamilyArg::ApproxPl => KernelFamily::ApproxPowerLaw { terms, ratio },
    }
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct ResidualArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Fit result or parameter JSON.
    #[arg(long)]
    pub params: PathBuf,
    /// Ljung–Box lags (default: min(20, N/10)).
    #[arg(long)]
    pub lags: Option<usize>,
    /// CSV of (xi, u) for external plotting.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long)]
    pub allow_ties: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct IoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub allow_ties: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeArg {
    Right,
    Left,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum TransformOp {
    /// Quantize timestamps to packet edges.
    Bundle {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = EdgeArg::Right)]
        edge: EdgeArg,
    },
    /// Redistribute timestamps uniformly inside their cells.
    Randomize {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Replace a fraction of durations by a multiple of the largest one.
    Outliers {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        multiplier: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Time change by the cumulative intensity profile.
    Detrend {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        profile: PathBuf,
    },
    /// Drop events before a time.
    Burn {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        time: f64,
        /// Shift so that the window starts at 0.
        #[arg(long)]
        reorigin: bool,
    },
    /// Estimate an intraday intensity profile from several days.
    Profile {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        bin_width: f64,
        #[arg(long)]
        allow_ties: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Join series end to end.
    Concat {
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        gap: f64,
        #[arg(long)]
        allow_ties: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kernel: FamilyArg,
    #[arg(long, default_value_t = 1e-3)]
    pub time_min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub time_max: f64,
    #[arg(long, default_value_t = 21)]
    pub time_count: usize,
    #[arg(long, default_value_t = 0.05)]
    pub exponent_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub exponent_max: f64,
    #[arg(long, default_value_t = 21)]
    pub exponent_count: usize,
    #[arg(long)]
    pub allow_ties: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct ExperimentArgs {
    /// Experiment id.
    pub id: String,
    /// Configuration file (`key = value`, with includes).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a setting, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Also run the scale audit at two scale factors, e.g. `0.1,0.3`.
    #[arg(long, value_name = "A,B")]
    pub audit: Option<String>,
}

/// Where a command sends its main output.
enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    fn resolve(out: &Option<PathBuf>, out_dir: &Path, default: &str) -> Sink {
        match out {
            Some(p) if p.as_os_str() == "-" => Sink::Stdout,
            Some(p) => Sink::File(p.clone()),
            None => Sink::File(out_dir.join(default)),
        }
    }

    fn writer(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match self {
            Sink::Stdout => Box::new(io::stdout().lock()),
            Sink::File(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                Box::new(BufWriter::new(
                    File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
                ))
            }
        })
    }

    fn write_text(&self, text: &str) -> anyhow::Result<()> {
        let mut w = self.writer()?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn write_series(&self, series: &EventSeries) -> anyhow::Result<()> {
        match self {
            Sink::File(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => {
                fio::write_series_csv(self.writer()?, series)?
            }
            _ => fio::write_series(self.writer()?, series)?,
        }
        Ok(())
    }

    fn path(&self) -> Option<&Path> {
        match self {
            Sink::Stdout => None,
            Sink::File(p) => Some(p),
        }
    }

    fn manifest_path(&self, out_dir: &Path, subcommand: &str) -> PathBuf {
        match self {
            Sink::Stdout => out_dir.join(format!("{subcommand}.manifest.json")),
            Sink::File(p) => manifest_path_for(p),
        }
    }
}

/// What a finished command reports back for its manifest.
struct RunRecord {
    subcommand: String,
    args: Vec<String>,
    config: BTreeMap<String, String>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    manifest: PathBuf,
}

fn load(path: &Path, allow_ties: bool) -> anyhow::Result<EventSeries> {
    fio::load_series(path, ReadOptions { allow_ties }).with_context(|| format!("reading {}", path.display()))
}

/// Background repeating an intensity profile over `(0, end]`.
fn periodic_background(profile: &preprocess::IntensityProfile, end: f64) -> anyhow::Result<BackgroundProfile> {
    let periods = (end / profile.period).ceil().max(1.0) as usize;
    let mut breakpoints = Vec::new();
    let mut rates = Vec::new();
    for p in 0..periods {
        let origin = p as f64 * profile.period;
        let one = profile.to_background(origin)?;
        breakpoints.extend_from_slice(&one.breakpoints[..one.breakpoints.len() - 1]);
        rates.extend_from_slice(&one.rates);
    }
    breakpoints.push(periods as f64 * profile.period);
    Ok(BackgroundProfile::new(breakpoints, rates)?)
}

fn config_of<T: Serialize>(value: &T) -> BTreeMap<String, String> {
    experiments::metadata_map(&serde_json::to_value(value).unwrap_or_default())
}

fn simulate(a: &SimulateArgs, out_dir: &Path, args: Vec<String>) -> anyhow::Result<RunRecord> {
    let spec = a.params.spec(a.kernel)?;
    let total = a.burn + a.horizon;
    if !(a.horizon > 0.0 && a.burn >= 0.0) {
        bail!("--T must be positive and --burn nonnegative");
    }
    let mut inputs = Vec::new();
    let params = match (&a.profile, a.mu) {
        (Some(path), _) => {
            let profile = fio::load_profile(path).with_context(|| format!("reading {}", path.display()))?;
            inputs.push(path.clone());
            HawkesParams::with_profile(periodic_background(&profile, total)?, a.n, spec)
        }
        (None, Some(mu)) => HawkesParams::new(mu, a.n, spec),
        (None, None) => bail!("either --mu or --profile is required"),
    };
    let raw = match a.method {
        Method::Branching => simulate_branching(&params, (0.0, total), a.seed, a.cap)?,
        Method::Thinning => simulate_thinning(&params, (0.0, total), a.seed, a.cap)?,
    };
    let series = burn(&raw, a.burn, true);
    log::info!("simulated {} events in the kept window", series.len());
    let sink = Sink::resolve(&a.out, out_dir, "series.txt");
    sink.write_series(&series)?;
    Ok(RunRecord {
        subcommand: "simulate".into(),
        args,
        config: config_of(a),
        seed: Some(a.seed),
        inputs,
        outputs: sink.path().map(Path::to_path_buf).into_iter().collect(),
        manifest: sink.manifest_path(out_dir, "simulate"),
    })
}

fn fit(a: &FitArgs, out_dir: &Path, args: Vec<String>) -> anyhow::Result<RunRecord> {
    let series = load(&a.input, a.allow_ties)?;
    let config = a.config()?;
    let result = hawkes_core::calibrate::fit(&series, &a.family(), &config)?;
    log::info!(
        "n = {:.6}, mu = {:.6}, kernel {:?}, stationarity residual {:e}",
        result.n_hat,
        result.mu_hat,
        result.kernel,
        result.stationarity_residual()
    );
    let sink = Sink::resolve(&a.out, out_dir, "fit.json");
    sink.write_text(&fio::to_json(&result)?)?;
    Ok(RunRecord {
        subcommand: "fit".into(),
        args,
        config: config_of(a),
        seed: None,
        inputs: vec![a.input.clone()],
        outputs: sink.path().map(Path::to_path_buf).into_iter().collect(),
        manifest: sink.manifest_path(out_dir, "fit"),
    })
}

#[derive(Serialize)]
struct ResidualSummary {
    events: usize,
    ks_stat: f64,
    ks_pvalue: f64,
    lb_stat: f64,
    lb_pvalue: f64,
    lb_lags: usize,
    passes_5pct: bool,
}

fn residuals(a: &ResidualArgs, out_dir: &Path, args: Vec<String>) -> anyhow::Result<RunRecord> {
    let series = load(&a.input, a.allow_ties)?;
    let params = fio::load_params(&a.params).with_context(|| format!("reading {}", a.params.display()))?;
    let report = residual_report(&series, &params, a.lags)?;
    let summary = ResidualSummary {
        events: series.len(),
        ks_stat: report.ks_stat,
        ks_pvalue: report.ks_pvalue,
        lb_stat: report.lb_stat,
        lb_pvalue: report.lb_pvalue,
        lb_lags: report.lb_lags,
        passes_5pct: report.passes(0.05),
    };
    let sink = Sink::resolve(&a.out, out_dir, "residuals.json");
    sink.write_text(&fio::to_json(&summary)?)?;
    let mut outputs: Vec<PathBuf> = sink.path().map(Path::to_path_buf).into_iter().collect();
    if let Some(dump) = &a.dump {
        let mut w = BufWriter::new(File::create(dump)?);
        writeln!(w, "xi,u")?;
        for (k, xi) in report.xi.iter().enumerate() {
            // u_k belongs to the gap ending at event k; the first event has none
            let u = if k == 0 { String::new() } else { fio::format_time(report.u[k - 1]) };
            writeln!(w, "{},{u}", fio::format_time(*xi))?;
        }
        w.flush()?;
        outputs.push(dump.clone());
    }
    Ok(RunRecord {
        subcommand: "residuals".into(),
        args,
        config: config_of(a),
        seed: None,
        inputs: vec![a.input.clone(), a.params.clone()],
        outputs,
        manifest: sink.manifest_path(out_dir, "residuals"),
    })
}

fn transform(op: &TransformOp, out_dir: &Path, args: Vec<String>) -> anyhow::Result<RunRecord> {
    let (series, io, seed, inputs) = match op {
        TransformOp::Bundle { io, delta, edge } => {
            let s = load(&io.input, io.allow_ties)?;
            let edge = match edge {
                EdgeArg::Right => BundleEdge::Right,
                EdgeArg::Left => BundleEdge::Left,
            };
            (preprocess::bundle(&s, *delta, edge)?, io, None, vec![io.input.clone()])
        }
        TransformOp::Randomize { io, delta, seed } => {
            // randomization exists to undo ties, so accept them on input
            let s = load(&io.input, true)?;
            (preprocess::randomize(&s, *delta, *seed)?, io, Some(*seed), vec![io.input.clone()])
        }
        TransformOp::Outliers {
            io,
            fraction,
            multiplier,
            seed,
        } => {
            let s = load(&io.input, io.allow_ties)?;
            let out = preprocess::inject_outliers(&s, *fraction, *multiplier, *seed)?;
            (out, io, Some(*seed), vec![io.input.clone()])
        }
        TransformOp::Detrend { io, profile } => {
            let s = load(&io.input, io.allow_ties)?;
            let p = fio::load_profile(profile).with_context(|| format!("reading {}", profile.display()))?;
            (preprocess::detrend(&s, &p)?, io, None, vec![io.input.clone(), profile.clone()])
        }
        TransformOp::Burn { io, time, reorigin } => {
            let s = load(&io.input, io.allow_ties)?;
            (burn(&s, *time, *reorigin), io, None, vec![io.input.clone()])
        }
        TransformOp::Profile {
            inputs,
            bin_width,
            allow_ties,
            out,
        } => {
            if inputs.is_empty() {
                bail!("profile needs at least one input series");
            }
            let days = inputs
                .iter()
                .map(|p| load(p, *allow_ties))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let profile = preprocess::estimate_profile(&days, *bin_width)?;
            let sink = Sink::resolve(out, out_dir, "profile.csv");
            fio::write_profile(sink.writer()?, &profile)?;
            return Ok(RunRecord {
                subcommand: "transform".into(),
                args,
                config: config_of(op),
                seed: None,
                inputs: inputs.clone(),
                outputs: sink.path().map(Path::to_path_buf).into_iter().collect(),
                manifest: sink.manifest_path(out_dir, "transform"),
            });
        }
        TransformOp::Concat {
            inputs,
            gap,
            allow_ties,
            out,
        } => {
            let parts = inputs
                .iter()
                .map(|p| load(p, *allow_ties))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let joined = preprocess::concatenate(&parts, *gap)?;
            let sink = Sink::resolve(out, out_dir, "series.txt");
            sink.write_series(&joined)?;
            return Ok(RunRecord {
                subcommand: "transform".into(),
                args,
                config: config_of(op),
                seed: None,
                inputs: inputs.clone(),
                outputs: sink.path().map(Path::to_path_buf).into_iter().collect(),
                manifest: sink.manifest_path(out_dir, "transform"),
            });
        }
    };
    let sink = Sink::resolve(&io.out, out_dir, "series.txt");
    sink.write_series(&series)?;
    Ok(RunRecord {
        subcommand: "transform".into(),
        args,
        config: config_of(op),
        seed,
        inputs,
        outputs: sink.path().map(Path::to_path_buf).into_iter().collect(),
        manifest: sink.manifest_path(out_dir, "transform"),
    })
}

fn surface(a: &SurfaceArgs, out_dir: &Path, args: Vec<String>) -> anyhow::Result<RunRecord> {
    let series = load(&a.input, a.allow_ties)?;
    let family = family_of(a.kernel, 15, 5.0);
    let s = cost_surface(
        &series,
        &family,
        Axis {
            lo: a.time_min,
            hi: a.time_max,
            count: a.time_count,
        },
        Axis {
            lo: a.exponent_min,
            hi: a.exponent_max,
            count: a.exponent_count,
        },
    )?;
    let sink = Sink::resolve(&a.out, out_dir, "surface.csv");
    let mut w = sink.writer()?;
    writeln!(w, "psi1,psi2,cost,mu_star,n_star")?;
    for node in &s.nodes {
        let cost = node.value.map_or_else(|| "NaN".to_string(), |v| format!("{v}"));
        writeln!(w, "{},{},{cost},{},{}", node.psi1, node.psi2, node.mu_star, node.n_star)?;
    }
    w.flush()?;
    Ok(RunRecord {
        subcommand: "surface".into(),
        args,
        config: config_of(a),
        seed: None,
        inputs: vec![a.input.clone()],
        outputs: sink.path().map(Path::to_path_buf).into_iter().collect(),
        manifest: sink.manifest_path(out_dir, "surface"),
    })
}

fn experiment(a: &ExperimentArgs, out_dir: &Path) -> anyhow::Result<RunRecord> {
    let mut cfg = match &a.config {
        Some(path) => Config::load(path)?,
        None => Config::new(),
    };
    for pair in &a.overrides {
        cfg.set_pair(pair)?;
    }
    let output = experiments::run(&a.id, &cfg)?;
    for key in cfg.unused() {
        log::warn!("setting `{key}` is not used by experiment {}", a.id);
    }
    for flag in &output.flags {
        log::warn!("{flag}");
    }
    let mut outputs = output.write(out_dir)?;
    if let Some(spec) = &a.audit {
        let scales: Vec<f64> = spec
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| anyhow!("--audit expects two scale factors `a,b`: {e}"))?;
        let [sa, sb] = scales[..] else {
            bail!("--audit expects exactly two scale factors");
        };
        let rows = experiments::scale_audit(&a.id, &cfg, (sa, sb))?;
        for r in rows.iter().filter(|r| r.flagged) {
            log::warn!(
                "scale sensitivity: {} at {} differs by {:.4} (band {:.4})",
                r.case,
                r.x,
                (r.mean_a - r.mean_b).abs(),
                r.band
            );
        }
        let path = out_dir.join(format!("{}_scale_audit.csv", a.id));
        experiments::write_audit(&path, &rows)?;
        outputs.push(path);
    }
    // the replay arguments carry every setting inline, so the config file is not needed again
    let mut args = vec!["experiment".to_string(), a.id.clone()];
    for (k, v) in cfg.entries() {
        args.push("--set".into());
        args.push(format!("{k}={v}"));
    }
    if let Some(audit) = &a.audit {
        args.push("--audit".into());
        args.push(audit.clone());
    }
    let mut config = cfg.entries().clone();
    for (k, v) in experiments::metadata_map(&output.settings) {
        config.entry(k).or_insert(v);
    }
    let seed = config.get("common.seed_base").and_then(|s| s.parse().ok());
    Ok(RunRecord {
        subcommand: "experiment".into(),
        args,
        config,
        seed,
        inputs: cfg.sources().to_vec(),
        outputs,
        manifest: out_dir.join(format!("{}.manifest.json", a.id)),
    })
}

/// Executes a parsed command line and writes its manifest.
fn execute(cli: Cli, raw_args: Vec<String>) -> anyhow::Result<()> {
    let started = Instant::now();
    let out_dir = cli.out_dir.clone();
    fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let with_dir = |mut args: Vec<String>| {
        args.push("--out-dir".into());
        args.push(out_dir.display().to_string());
        args
    };
    let record = match &cli.command {
        Command::Simulate(a) => simulate(a, &out_dir, with_dir(raw_args))?,
        Command::Fit(a) => fit(a, &out_dir, with_dir(raw_args))?,
        Command::Residuals(a) => residuals(a, &out_dir, with_dir(raw_args))?,
        Command::Transform { op } => transform(op, &out_dir, with_dir(raw_args))?,
        Command::Surface(a) => surface(a, &out_dir, with_dir(raw_args))?,
        Command::Experiment(a) => {
            let mut r = experiment(a, &out_dir)?;
            r.args = with_dir(r.args);
            r
        }
        Command::Replay { manifest } => {
            let m = RunManifest::load(manifest).with_context(|| format!("reading {}", manifest.display()))?;
            if m.version != crate::manifest::VERSION {
                log::warn!("manifest written by version {}, replaying with {}", m.version, crate::manifest::VERSION);
            }
            let argv = std::iter::once("hawkes".to_string()).chain(m.args.iter().cloned());
            let mut replayed = Cli::try_parse_from(argv).map_err(|e| anyhow!("manifest arguments: {e}"))?;
            if matches!(replayed.command, Command::Replay { .. }) {
                bail!("a manifest cannot replay another replay");
            }
            replayed.jobs = cli.jobs;
            return execute(replayed, strip_global(m.args.clone()));
        }
    };
    let mut manifest = RunManifest::new(&record.subcommand, record.args);
    manifest.config = record.config;
    manifest.seed = record.seed;
    manifest.inputs = record.inputs;
    manifest.outputs = record.outputs;
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.save(&record.manifest)?;
    log::info!("manifest written to {}", record.manifest.display());
    Ok(())
}

fn is_numerical(e: &hawkes_core::Error) -> bool {
    matches!(
        e,
        hawkes_core::Error::FitFailure(_)
            | hawkes_core::Error::Truncated { .. }
            | hawkes_core::Error::NonPositiveIntensity { .. }
            | hawkes_core::Error::DegenerateProfile { .. }
    )
}

/// 2 for numerical failures anywhere in the error chain, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        let model = cause
            .downcast_ref::<hawkes_core::Error>()
            .or_else(|| match cause.downcast_ref::<ExperimentError>() {
                Some(ExperimentError::Model(e)) => Some(e),
                _ => None,
            })
            .or_else(|| match cause.downcast_ref::<FormatError>() {
                Some(FormatError::Model(e)) => Some(e),
                _ => None,
            });
        if model.is_some_and(is_numerical) {
            return 2;
        }
    }
    1
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

/// Entry point: parses `argv` (including the program name) and returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("cannot size the worker pool: {e}");
        }
    }
    let raw: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let raw = strip_global(raw);
    match execute(cli, raw) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

/// Removes `--jobs`, `--out-dir` and `-v` from recorded arguments; the
/// manifest re-adds the resolved output directory itself.
fn strip_global(args: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--jobs" || a == "--out-dir" {
            it.next();
        } else if !is_global_flag(&a) {
            out.push(a);
        }
    }
    out
}

fn is_global_flag(a: &str) -> bool {
    a.starts_with("--jobs=")
        || a.starts_with("--out-dir=")
        || a == "--verbose"
        || (a.len() > 1 && a.starts_with('-') && !a.starts_with("--") && a[1..].chars().all(|c| c == 'v'))
}
