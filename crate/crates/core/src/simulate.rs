//! Poisson and Hawkes simulators.
//!
//! [`simulate_thinning`] is Ogata's modified thinning: propose from a local
//! upper bound of the conditional intensity and accept with probability
//! `λ(t)/bound`. [`simulate_branching`] builds the cluster representation
//! generation by generation. Both are exact and deterministic given the seed.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{Error, Result};
use crate::kernels::{ExpTerm, Kernel, KernelSpec};
use crate::math;
use crate::series::{Background, BackgroundProfile, EventSeries, HawkesParams};

/// Default event cap, a guard against supercritical blow-up.
pub const DEFAULT_CAP: usize = 100_000_000;

/// The generator used by every simulator in this crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_window(window: (f64, f64)) -> Result<()> {
    let (start, end) = window;
    if !(start.is_finite() && end.is_finite() && start <= end) {
        return Err(Error::param(alloc::format!(
            "window ({start}, {end}] is not a finite interval"
        )));
    }
    Ok(())
}

fn truncated(mut times: Vec<f64>, start: f64, cap: usize) -> Error {
    times.sort_by(f64::total_cmp);
    times.truncate(cap);
    let end = times.last().copied().unwrap_or(start);
    Error::Truncated {
        partial: EventSeries {
            times,
            window_start: start,
            window_end: end,
        },
        cap,
    }
}

/// Exponential states `A_k(t) = Σ_{t_j < t} e^{-r_k (t - t_j)}`.
struct Markov {
    terms: Vec<ExpTerm>,
    state: Vec<f64>,
}

impl Markov {
    fn new(terms: Vec<ExpTerm>) -> Self {
        let state = vec![0.0; terms.len()];
        Markov { terms, state }
    }

    fn decay(&mut self, dt: f64) {
        for (a, e) in self.state.iter_mut().zip(&self.terms) {
            *a *= math::exp(-e.rate * dt);
        }
    }

    fn excite(&mut self) {
        for a in &mut self.state {
            *a += 1.0;
        }
    }

    fn value(&self) -> f64 {
        self.state.iter().zip(&self.terms).map(|(a, e)| e.weight * a).sum()
    }

    /// Sum over the positive terms only; nonincreasing between events.
    fn bound(&self) -> f64 {
        self.state
            .iter()
            .zip(&self.terms)
            .filter(|(_, e)| e.weight > 0.0)
            .map(|(a, e)| e.weight * a)
            .sum()
    }
}

enum Memory {
    Markov(Markov),
    Direct { kernel: Kernel, past: Vec<f64> },
}

impl Memory {
    fn new(kernel: Kernel) -> Self {
        match kernel.spec() {
            KernelSpec::Exponential { .. } | KernelSpec::ApproxPowerLaw { .. } => {
                let terms = kernel.expansion(0.0).expect("exact expansion").terms;
                Memory::Markov(Markov::new(terms))
            }
            _ => Memory::Direct {
                kernel,
                past: Vec::new(),
            },
        }
    }

    fn advance(&mut self, dt: f64) {
        if let Memory::Markov(m) = self {
            m.decay(dt);
        }
    }

    fn record(&mut self, t: f64) {
        match self {
            Memory::Markov(m) => m.excite(),
            Memory::Direct { past, .. } => past.push(t),
        }
    }

    fn excitation(&self, t: f64) -> f64 {
        match self {
            Memory::Markov(m) => m.value(),
            Memory::Direct { kernel, past } => past.iter().map(|&s| kernel.evaluate(t - s)).sum(),
        }
    }

    /// Upper bound of the excitation on `[t, ∞)` with no new events.
    fn bound(&self, t: f64) -> f64 {
        match self {
            Memory::Markov(m) => m.bound(),
            Memory::Direct { kernel, past } => match *kernel.spec() {
                KernelSpec::CutoffPowerLaw { tau0, epsilon } => past
                    .iter()
                    .map(|&s| {
                        let lag = t - s;
                        if lag < tau0 {
                            epsilon / tau0
                        } else {
                            kernel.evaluate(lag)
                        }
                    })
                    .sum(),
                _ => past.iter().map(|&s| kernel.evaluate(t - s)).sum(),
            },
        }
    }
}

/// Exact Hawkes sample on `(window.0, window.1]` by Ogata thinning.
///
/// `O(N)` for the exponential and sum-of-exponentials kernels via the
/// intensity recursion, `O(N²)` for the power laws. The simulation starts
/// empty at `window.0`; use [`burn`] to discard the transient.
pub fn simulate_thinning(params: &HawkesParams, window: (f64, f64), seed: u64, cap: usize) -> Result<EventSeries> {
    simulate_thinning_with(params, window, &mut rng_from_seed(seed), cap)
}

pub fn simulate_thinning_with<R: Rng + ?Sized>(
    params: &HawkesParams,
    window: (f64, f64),
    rng: &mut R,
    cap: usize,
) -> Result<EventSeries> {
    params.validate()?;
    check_window(window)?;
    let (start, end) = window;
    let n = params.n;
    let mut memory = Memory::new(params.kernel.build()?);
    let mut times = Vec::new();
    let mut t = start;

    while t < end {
        let (mu_bound, change) = params.mu.local_bound(t);
        let limit = change.map_or(end, |c| c.min(end));
        let bound = mu_bound + n * memory.bound(t);
        let step = if bound > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / bound
        } else {
            f64::INFINITY
        };
        if t + step >= limit {
            // nothing accepted before the bound changes; the proposal stream is memoryless
            memory.advance(limit - t);
            t = limit;
            continue;
        }
        memory.advance(step);
        t += step;
        let lambda = params.mu.rate_at(t) + n * memory.excitation(t);
        let u: f64 = rng.random();
        if u * bound <= lambda {
            if times.len() == cap {
                return Err(truncated(times, start, cap));
            }
            times.push(t);
            if n > 0.0 {
                memory.record(t);
            }
        }
    }
    Ok(EventSeries {
        times,
        window_start: start,
        window_end: end,
    })
}

/// Segments `(a, b, rate)` of the background restricted to the window.
fn background_segments(mu: &Background, start: f64, end: f64) -> Vec<(f64, f64, f64)> {
    match mu {
        Background::Constant(rate) => vec![(start, end, *rate)],
        Background::Profile(p) => p
            .rates
            .iter()
            .enumerate()
            .filter_map(|(k, &r)| {
                let a = p.breakpoints[k].max(start);
                let b = p.breakpoints[k + 1].min(end);
                (b > a).then_some((a, b, r))
            })
            .collect(),
    }
}

fn immigrants<R: Rng + ?Sized>(mu: &Background, start: f64, end: f64, rng: &mut R, out: &mut Vec<f64>, cap: usize) -> bool {
    for (a, b, rate) in background_segments(mu, start, end) {
        if rate <= 0.0 {
            continue;
        }
        let mut t = a;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / rate;
            if t > b {
                break;
            }
            if out.len() == cap {
                return false;
            }
            out.push(t);
        }
    }
    true
}

/// Cluster bookkeeping from [`simulate_branching_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingTrace {
    pub series: EventSeries,
    /// Index (into `series.times`) of each event's parent; `None` for immigrants.
    pub parent: Vec<Option<usize>>,
    /// Number of offspring drawn for each event, including those that fell past the window.
    pub offspring: Vec<u32>,
    pub generation: Vec<u32>,
}

/// Exact Hawkes sample by generation-by-generation cluster construction.
///
/// Immigrants follow `μ(t)`; each event draws `Poisson(n)` children with
/// delays from `h`. Children past the window end are dropped along with
/// their (necessarily later) descendants.
pub fn simulate_branching(params: &HawkesParams, window: (f64, f64), seed: u64, cap: usize) -> Result<EventSeries> {
    simulate_branching_with(params, window, &mut rng_from_seed(seed), cap)
}

pub fn simulate_branching_with<R: Rng + ?Sized>(
    params: &HawkesParams,
    window: (f64, f64),
    rng: &mut R,
    cap: usize,
) -> Result<EventSeries> {
    branching(params, window, rng, cap, false).map(|t| t.series)
}

/// [`simulate_branching`] keeping parent links and offspring counts.
pub fn simulate_branching_traced(params: &HawkesParams, window: (f64, f64), seed: u64, cap: usize) -> Result<BranchingTrace> {
    branching(params, window, &mut rng_from_seed(seed), cap, true)
}

fn branching<R: Rng + ?Sized>(
    params: &HawkesParams,
    window: (f64, f64),
    rng: &mut R,
    cap: usize,
    trace: bool,
) -> Result<BranchingTrace> {
    params.validate()?;
    check_window(window)?;
    let (start, end) = window;
    let kernel = params.kernel.build()?;
    let offspring_law = if params.n > 0.0 {
        Some(Poisson::new(params.n).map_err(|_| Error::param("branching ratio out of range for Poisson"))?)
    } else {
        None
    };

    let mut times = Vec::new();
    if !immigrants(&params.mu, start, end, rng, &mut times, cap) {
        return Err(truncated(times, start, cap));
    }
    let mut parent: Vec<Option<usize>> = if trace { vec![None; times.len()] } else { Vec::new() };
    let mut generation: Vec<u32> = if trace { vec![0; times.len()] } else { Vec::new() };
    let mut offspring: Vec<u32> = Vec::new();

    let mut current = 0..times.len();
    let mut gen = 0u32;
    while !current.is_empty() {
        gen += 1;
        let next_start = times.len();
        for i in current.clone() {
            let count = match &offspring_law {
                Some(law) => law.sample(rng) as u32,
                None => 0,
            };
            if trace {
                offspring.push(count);
            }
            let t_parent = times[i];
            for _ in 0..count {
                let child = t_parent + kernel.sample_delay(rng);
                if child > end {
                    continue;
                }
                if times.len() == cap {
                    return Err(truncated(times, start, cap));
                }
                times.push(child);
                if trace {
                    parent.push(Some(i));
                    generation.push(gen);
                }
            }
        }
        current = next_start..times.len();
    }

    if !trace {
        times.sort_by(f64::total_cmp);
        return Ok(BranchingTrace {
            series: EventSeries {
                times,
                window_start: start,
                window_end: end,
            },
            parent,
            offspring,
            generation,
        });
    }

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; order.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    Ok(BranchingTrace {
        series: EventSeries {
            times: order.iter().map(|&i| times[i]).collect(),
            window_start: start,
            window_end: end,
        },
        parent: order.iter().map(|&i| parent[i].map(|p| rank[p])).collect(),
        offspring: order.iter().map(|&i| offspring[i]).collect(),
        generation: order.iter().map(|&i| generation[i]).collect(),
    })
}

/// Drops events at or before `t_burn` and moves the window start there.
/// With `reorigin`, times are shifted so the new window starts at 0.
pub fn burn(series: &EventSeries, t_burn: f64, reorigin: bool) -> EventSeries {
    let t_burn = t_burn.clamp(series.window_start, series.window_end);
    let first = series.times.partition_point(|&t| t <= t_burn);
    let kept = &series.times[first..];
    if reorigin {
        EventSeries {
            times: kept.iter().map(|t| t - t_burn).collect(),
            window_start: 0.0,
            window_end: series.window_end - t_burn,
        }
    } else {
        EventSeries {
            times: kept.to_vec(),
            window_start: t_burn,
            window_end: series.window_end,
        }
    }
}

/// Piecewise-homogeneous Poisson process, exact on every segment.
pub fn simulate_poisson(profile: &BackgroundProfile, window: (f64, f64), seed: u64) -> Result<EventSeries> {
    simulate_poisson_with(profile, window, &mut rng_from_seed(seed))
}

pub fn simulate_poisson_with<R: Rng + ?Sized>(
    profile: &BackgroundProfile,
    window: (f64, f64),
    rng: &mut R,
) -> Result<EventSeries> {
    check_window(window)?;
    let mu = Background::Profile(profile.clone());
    mu.validate()?;
    let mut times = Vec::new();
    immigrants(&mu, window.0, window.1, rng, &mut times, usize::MAX);
    Ok(EventSeries {
        times,
        window_start: window.0,
        window_end: window.1,
    })
}
