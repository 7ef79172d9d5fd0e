//! Finite-shot sampling of count distributions and the statistical error of
//! frequency estimates.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::CountHistogram;
use crate::table::FCTable;

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Multinomial draw of `shots` outcomes; tail mass lands in overflow.
pub fn sample(p: &FCTable, shots: u64, seed: u64) -> Result<CountHistogram> {
    if shots == 0 {
        return Err(Error::InvalidParameter {
            name: "shots",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let outcomes: Vec<Vec<usize>> = p.iter().map(|(k, _)| k.to_vec()).collect();
    let probs: Vec<f64> = p.iter().map(|(_, v)| v).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = multinomial(&probs, shots, &mut rng);
    let listed: u64 = drawn.iter().sum();
    let counts: BTreeMap<_, _> = outcomes.into_iter().zip(drawn).collect();
    CountHistogram::new(counts, shots - listed)
}

/// Sequential conditional binomials; whatever `probs` leaves of unit mass is
/// the implicit last category.
fn multinomial(probs: &[f64], n: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut left = n;
    let mut mass_left = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        if left == 0 || p <= 0.0 {
            out.push(0);
            continue;
        }
        let q = (p / mass_left).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("probability within [0, 1]").sample(rng);
        out.push(k);
        left -= k;
        mass_left = (mass_left - p).max(0.0);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum StatErrorMethod {
    /// Percentile of the distance between bootstrap resamples and the estimate.
    Bootstrap { resamples: usize, confidence: f64, seed: u64 },
    /// Distribution-free bound `sqrt(K/N)/2 + sqrt(ln(1/(1-c))/(2N))` over
    /// the `K` observed categories.
    Concentration { confidence: f64 },
}

impl StatErrorMethod {
    pub fn bootstrap(seed: u64) -> Self {
        StatErrorMethod::Bootstrap {
            resamples: DEFAULT_RESAMPLES,
            confidence: DEFAULT_CONFIDENCE,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcEstimate {
    pub table: FCTable,
    pub eps_stat: f64,
}

/// Relative frequencies and their statistical error.
pub fn estimate_fc(hist: &CountHistogram, method: StatErrorMethod) -> Result<FcEstimate> {
    let table = hist.to_table();
    let n = hist.total_shots();
    let mut counts: Vec<u64> = hist.counts().values().copied().collect();
    counts.push(hist.overflow());
    let eps_stat = match method {
        StatErrorMethod::Bootstrap {
            resamples,
            confidence,
            seed,
        } => bootstrap_eps(&counts, n, resamples, confidence, seed)?,
        StatErrorMethod::Concentration { confidence } => {
            check_confidence(confidence)?;
            let k = counts.iter().filter(|&&c| c > 0).count() as f64;
            let nf = n as f64;
            0.5 * (k / nf).sqrt() + ((1.0 / (1.0 - confidence)).ln() / (2.0 * nf)).sqrt()
        }
    };
    Ok(FcEstimate { table, eps_stat })
}

fn check_confidence(c: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter {
            name: "confidence",
            value: c,
            reason: "must lie in (0, 1)",
        });
    }
    Ok(())
}

fn bootstrap_eps(counts: &[u64], n: u64, resamples: usize, confidence: f64, seed: u64) -> Result<f64> {
    check_confidence(confidence)?;
    if resamples == 0 {
        return Err(Error::InvalidParameter {
            name: "resamples",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let nf = n as f64;
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
    let mut dists: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let star = multinomial(&probs, n, &mut rng);
            0.5 * star
                .iter()
                .zip(counts)
                .map(|(&s, &c)| (s as f64 - c as f64).abs())
                .sum::<f64>()
                / nf
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    let idx = ((confidence * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    Ok(dists[idx])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tvd;

    #[test]
    fn point_mass_and_single_shot() {
        let p = FCTable::point(vec![0, 0]).unwrap();
        let h = sample(&p, 1000, 1).unwrap();
        assert_eq!(h.count(&[0, 0]), 1000);
        let p = FCTable::from_entries(2, 2, [(vec![0, 0], 0.5), (vec![1, 0], 0.5)]).unwrap();
        assert_eq!(sample(&p, 1, 3).unwrap().total_shots(), 1);
        assert!(sample(&p, 0, 3).is_err());
    }

    #[test]
    fn tail_goes_to_overflow_and_seed_reproduces() {
        let p = FCTable::from_entries(1, 2, [(vec![0], 0.6), (vec![1], 0.2)]).unwrap();
        let a = sample(&p, 100_000, 9).unwrap();
        assert_eq!(a, sample(&p, 100_000, 9).unwrap());
        assert_eq!(a.total_shots(), 100_000);
        assert!((a.overflow() as f64 / 1e5 - 0.2).abs() < 0.01);
        assert!(tvd(&a.to_table(), &p).unwrap() < 0.01);
    }

    #[test]
    fn degenerate_histogram_has_no_error() {
        let h = sample(&FCTable::point(vec![2, 0]).unwrap(), 500, 0).unwrap();
        let est = estimate_fc(&h, StatErrorMethod::bootstrap(0)).unwrap();
        assert_eq!(est.eps_stat, 0.0);
        assert_eq!(est.table.get(&[2, 0]), 1.0);
    }

    #[test]
    fn concentration_bound_dominates_bootstrap() {
        let p = FCTable::from_entries(1, 4, [(vec![0], 0.4), (vec![1], 0.3), (vec![2], 0.3)]).unwrap();
        let h = sample(&p, 10_000, 5).unwrap();
        let boot = estimate_fc(&h, StatErrorMethod::bootstrap(1)).unwrap().eps_stat;
        let conc = estimate_fc(&h, StatErrorMethod::Concentration { confidence: 0.95 })
            .unwrap()
            .eps_stat;
        assert!(boot > 0.0 && boot < conc, "{boot} {conc}");
    }
}
