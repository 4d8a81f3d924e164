//! Box-constrained Nelder–Mead simplex search.
//!
//! Trial points are projected onto the box, which keeps the method
//! derivative-free and lets the objective return `f64::INFINITY` for
//! inadmissible points. After the first convergence the simplex is rebuilt
//! once around the best vertex to guard against premature collapse.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Converged once every vertex lies within `xtol` (max-norm) of the best one.
    pub xtol: f64,
    /// Optional absolute spread of objective values; `0` disables the test.
    pub ftol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iter: 500,
            xtol: 1e-6,
            ftol: 0.0,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Simplex {
    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.points = order.iter().map(|&i| self.points[i].clone()).collect();
        self.values = order.iter().map(|&i| self.values[i]).collect();
    }

    fn diameter(&self) -> f64 {
        let best = &self.points[0];
        self.points[1..]
            .iter()
            .flat_map(|p| p.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    fn spread(&self) -> f64 {
        let last = *self.values.last().unwrap();
        if last.is_finite() {
            last - self.values[0]
        } else {
            f64::INFINITY
        }
    }
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
pub fn minimize<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], options: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    assert!(dim > 0 && lower.len() == dim && upper.len() == dim);
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let build = |center: &[f64], eval: &mut dyn FnMut(&[f64]) -> f64, center_value: Option<f64>| {
        let mut start = center.to_vec();
        project(&mut start, lower, upper);
        let mut points = vec![start.clone()];
        for i in 0..dim {
            let mut p = start.clone();
            let step = options.initial_step;
            p[i] += if p[i] + step <= upper[i] { step } else { -step };
            project(&mut p, lower, upper);
            points.push(p);
        }
        let values: Vec<f64> = points
            .iter()
            .enumerate()
            .map(|(i, p)| match (i, center_value) {
                (0, Some(v)) => v,
                _ => eval(p),
            })
            .collect();
        let mut s = Simplex { points, values };
        s.sort();
        s
    };

    let mut simplex = build(x0, &mut eval, None);
    let mut iterations = 0;
    let mut restarted = false;
    let mut converged = false;

    while iterations < options.max_iter {
        let done = simplex.diameter() < options.xtol || (options.ftol > 0.0 && simplex.spread() < options.ftol);
        if done {
            if restarted {
                converged = true;
                break;
            }
            restarted = true;
            let best = simplex.points[0].clone();
            let value = simplex.values[0];
            simplex = build(&best, &mut eval, Some(value));
            continue;
        }
        iterations += 1;

        let worst = dim;
        let mut centroid = vec![0.0; dim];
        for p in &simplex.points[..worst] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / dim as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex.points[worst])
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            project(&mut p, lower, upper);
            p
        };

        let reflected = along(1.0);
        let fr = eval(&reflected);
        if fr < simplex.values[0] {
            let expanded = along(2.0);
            let fe = eval(&expanded);
            if fe < fr {
                simplex.points[worst] = expanded;
                simplex.values[worst] = fe;
            } else {
                simplex.points[worst] = reflected;
                simplex.values[worst] = fr;
            }
        } else if fr < simplex.values[worst - 1] {
            simplex.points[worst] = reflected;
            simplex.values[worst] = fr;
        } else {
            let (contracted, fc) = if fr < simplex.values[worst] {
                let p = along(0.5);
                let v = eval(&p);
                (p, v)
            } else {
                let p = along(-0.5);
                let v = eval(&p);
                (p, v)
            };
            if fc < simplex.values[worst].min(fr) {
                simplex.points[worst] = contracted;
                simplex.values[worst] = fc;
            } else {
                let best = simplex.points[0].clone();
                for i in 1..=dim {
                    let mut p: Vec<f64> = simplex.points[i]
                        .iter()
                        .zip(&best)
                        .map(|(x, b)| b + 0.5 * (x - b))
                        .collect();
                    project(&mut p, lower, upper);
                    simplex.values[i] = eval(&p);
                    simplex.points[i] = p;
                }
            }
        }
        simplex.sort();
    }

    Minimum {
        x: simplex.points[0].clone(),
        value: simplex.values[0],
        iterations,
        evaluations,
        converged,
    }
}
