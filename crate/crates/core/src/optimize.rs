//! Derivative-free maximization of the model fidelity and Monte Carlo
//! propagation of parameter uncertainty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentModel, ParameterUncertainty, Source};
use crate::vibronic::OpticalTarget;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Convergence threshold on the simplex diameter.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            tol: 1e-6,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `objective` with the Nelder-Mead simplex, clamping every trial
/// point into `bounds`. Non-finite objective values count as `-inf`.
pub fn nelder_mead<F>(
    objective: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    options: NelderMeadOptions,
) -> Result<NelderMeadResult>
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "start",
            value: 0.0,
            reason: "needs at least one parameter",
        });
    }
    if bounds.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bounds.len(),
        });
    }
    for (&x, &(lo, hi)) in start.iter().zip(bounds) {
        if !(lo <= x && x <= hi) {
            return Err(Error::InvalidParameter {
                name: "start",
                value: x,
                reason: "must lie within its bounds",
            });
        }
    }
    let clamp = |x: &mut Vec<f64>| {
        for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
    };
    let eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), eval(start)));
    for i in 0..n {
        let mut x = start.to_vec();
        let step = if x[i] != 0.0 { 0.05 * x[i] } else { 0.00025 };
        x[i] += step;
        clamp(&mut x);
        if x[i] == start[i] {
            x[i] -= step;
            clamp(&mut x);
        }
        let f = eval(&x);
        simplex.push((x, f));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iter {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < options.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let toward = |coef: f64| {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            clamp(&mut x);
            x
        };

        let xr = toward(options.reflection);
        let fr = eval(&xr);
        if fr > simplex[0].1 {
            let xe = toward(options.reflection * options.expansion);
            let fe = eval(&xe);
            simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr > simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        if fr > simplex[n].1 {
            let xc = toward(options.reflection * options.contraction);
            let fc = eval(&xc);
            if fc >= fr {
                simplex[n] = (xc, fc);
                continue;
            }
        } else {
            let xc = toward(-options.contraction);
            let fc = eval(&xc);
            if fc > simplex[n].1 {
                simplex[n] = (xc, fc);
                continue;
            }
        }
        let best = simplex[0].0.clone();
        for (x, f) in simplex[1..].iter_mut() {
            for (v, b) in x.iter_mut().zip(&best) {
                *v = b + options.shrink * (*v - b);
            }
            *f = eval(x);
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (argmax, value) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        argmax,
        value,
        iterations,
        converged,
    })
}

/// Which controllable parameters the optimizer may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreeParameters {
    pub squeezing: bool,
    pub bs_transmission: bool,
}

impl Default for FreeParameters {
    fn default() -> Self {
        Self {
            squeezing: true,
            bs_transmission: true,
        }
    }
}

pub const SQUEEZING_BOUND: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedExperiment {
    pub model: ExperimentModel,
    pub fidelity: f64,
    pub start_fidelity: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn squeezings(source: &Source) -> Vec<f64> {
    match *source {
        Source::SmsvPair { r1, r2 } => vec![r1, r2],
        Source::Tmsv { r } => vec![r],
    }
}

fn with_squeezings(source: &Source, r: &[f64]) -> Source {
    match source {
        Source::SmsvPair { .. } => Source::SmsvPair { r1: r[0], r2: r[1] },
        Source::Tmsv { .. } => Source::Tmsv { r: r[0] },
    }
}

/// Maximizes the model fidelity to `target` over the free parameters, with
/// losses, distinguishability and detectors held fixed.
///
/// Runs from the template and from its mirror with all squeezing signs
/// flipped, each followed by a restart from its own optimum.
pub fn optimize_experiment(
    template: &ExperimentModel,
    target: &OpticalTarget,
    free: FreeParameters,
    options: NelderMeadOptions,
) -> Result<OptimizedExperiment> {
    template.validate()?;
    if !free.squeezing && !free.bs_transmission {
        return Err(Error::InvalidParameter {
            name: "free parameters",
            value: 0.0,
            reason: "at least one parameter must be free",
        });
    }
    let target_state = target.state();
    let start_fidelity = template.model_fidelity_to(&target_state)?;
    let r0 = squeezings(&template.source);
    let nr = if free.squeezing { r0.len() } else { 0 };

    let unpack = |x: &[f64]| -> ExperimentModel {
        let mut m = *template;
        if free.squeezing {
            m.source = with_squeezings(&template.source, &x[..nr]);
        }
        if free.bs_transmission {
            m.bs_transmission = x[nr];
        }
        m
    };
    let objective = |x: &[f64]| {
        unpack(x)
            .model_fidelity_to(&target_state)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut bounds = vec![(-SQUEEZING_BOUND, SQUEEZING_BOUND); nr];
    let mut start = if free.squeezing {
        r0.iter().map(|r| r.clamp(-SQUEEZING_BOUND, SQUEEZING_BOUND)).collect()
    } else {
        Vec::new()
    };
    if free.bs_transmission {
        bounds.push((0.0, 1.0));
        start.push(template.bs_transmission);
    }
    let mut starts = vec![start.clone()];
    if free.squeezing && r0.iter().any(|&r| r != 0.0) {
        let mut mirrored = start;
        for v in &mut mirrored[..nr] {
            *v = -*v;
        }
        starts.push(mirrored);
    }

    let runs = starts
        .par_iter()
        .map(|s| {
            let first = nelder_mead(objective, s, &bounds, options)?;
            let second = nelder_mead(objective, &first.argmax, &bounds, options)?;
            let iterations = first.iterations + second.iterations;
            let best = if second.value >= first.value { second } else { first };
            Ok(NelderMeadResult { iterations, ..best })
        })
        .collect::<Result<Vec<_>>>()?;
    let iterations = runs.iter().map(|r| r.iterations).sum();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("at least one start");
    let (model, fidelity) = if best.value >= start_fidelity {
        (unpack(&best.argmax), best.value)
    } else {
        (*template, start_fidelity)
    };
    Ok(OptimizedExperiment {
        model,
        fidelity,
        start_fidelity,
        iterations,
        converged: best.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloFidelity {
    pub mean: f64,
    pub std: f64,
    pub samples: Vec<f64>,
    /// Number of drawn parameters that had to be clamped into range.
    pub clamped: usize,
}

/// Draws `n` models with independently perturbed parameters and evaluates
/// their fidelity to `target`.
///
/// Transmissions below one and a nonzero distinguishability are perturbed;
/// draws outside `[0, 1]` are clamped. Sample `i` uses stream `i` of a
/// generator seeded with `seed`, so results do not depend on thread count.
pub fn monte_carlo_fidelity(
    model: &ExperimentModel,
    target: &OpticalTarget,
    unc: &ParameterUncertainty,
    n: usize,
    seed: u64,
) -> Result<MonteCarloFidelity> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "needs at least two samples",
        });
    }
    model.validate()?;
    unc.validate()?;
    let target_state = target.state();
    let draws = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let (m, clamped) = perturb(model, unc, &mut rng);
            Ok((m.model_fidelity_to(&target_state)?, clamped))
        })
        .collect::<Result<Vec<(f64, usize)>>>()?;
    let samples: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let clamped = draws.iter().map(|d| d.1).sum();
    let pivot = samples[0];
    let mean = pivot + samples.iter().map(|f| f - pivot).sum::<f64>() / n as f64;
    let var = samples.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(MonteCarloFidelity {
        mean,
        std: var.sqrt(),
        samples,
        clamped,
    })
}

fn perturb(model: &ExperimentModel, unc: &ParameterUncertainty, rng: &mut ChaCha8Rng) -> (ExperimentModel, usize) {
    let mut clamped = 0;
    let mut draw = |x: f64, sigma: f64, unit: bool| -> f64 {
        if sigma == 0.0 {
            return x;
        }
        let v = Normal::new(x, sigma).expect("finite sigma").sample(rng);
        if unit && !(0.0..=1.0).contains(&v) {
            clamped += 1;
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    };
    let mut m = *model;
    for eta in m.eta_pre.iter_mut().chain(m.eta_post.iter_mut()) {
        if *eta < 1.0 {
            *eta = draw(*eta, unc.sigma_loss, true);
        }
    }
    let r: Vec<f64> = squeezings(&m.source)
        .into_iter()
        .map(|r| draw(r, unc.sigma_r, false))
        .collect();
    m.source = with_squeezings(&m.source, &r);
    m.bs_transmission = draw(m.bs_transmission, unc.sigma_t, true);
    if m.distinguishability > 0.0 {
        m.distinguishability = draw(m.distinguishability, unc.sigma_delta, true);
    }
    (m, clamped)
}
