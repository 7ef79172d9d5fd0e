//! Characterization fits: source tomography from count histograms, the pump
//! power law and distinguishability from interference visibility.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::experiment::{DetectorModel, ExperimentModel, Source};
use crate::histogram::CountHistogram;
use crate::metrics::tvd;
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::table::FCTable;

pub const DEFAULT_FIT_CUTOFF: usize = 12;
pub const DEFAULT_PLATEAU_UW: f64 = 100.0;
pub const MAX_FIT_SQUEEZING: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Outcomes with any count at or above this pool into the residual sink.
    pub cutoff: usize,
    pub simplex: NelderMeadOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_FIT_CUTOFF,
            simplex: NelderMeadOptions {
                tol: 1e-10,
                ..NelderMeadOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyFit {
    pub r: f64,
    pub eta: [f64; 2],
    /// Mean distance between fitted and measured statistics over both settings.
    pub residual_tvd: f64,
    pub converged: bool,
    /// Some parameter ended on the edge of its range.
    pub at_bounds: bool,
}

impl TomographyFit {
    /// The fitted source as an experiment with the splitter fully transmitting.
    pub fn model(&self, detector: DetectorModel) -> ExperimentModel {
        source_model(self.r, self.eta, 1.0, detector)
    }
}

fn source_model(r: f64, eta: [f64; 2], t: f64, detector: DetectorModel) -> ExperimentModel {
    ExperimentModel {
        source: Source::Tmsv { r },
        bs_transmission: t,
        eta_pre: eta,
        eta_post: [1.0, 1.0],
        distinguishability: 0.0,
        detector,
    }
}

/// Entries of `table` inside the `cutoff` box; the rest joins the tail.
fn boxed(table: &FCTable, cutoff: usize) -> FCTable {
    FCTable::from_entries(
        table.num_modes(),
        cutoff,
        table
            .iter()
            .filter(|(k, _)| k.iter().all(|&m| m < cutoff))
            .map(|(k, p)| (k.to_vec(), p)),
    )
    .expect("subset of a valid table")
}

/// Fits two-mode squeezing and per-arm transmissions to histograms taken with
/// the splitter set to full transmission and to full reflection.
///
/// The detector model is held fixed at its independently characterized values.
pub fn fit_source(
    hist_100_0: &CountHistogram,
    hist_0_100: &CountHistogram,
    det: &DetectorModel,
    options: FitOptions,
) -> Result<TomographyFit> {
    for h in [hist_100_0, hist_0_100] {
        if h.num_modes() != 2 {
            return Err(Error::Histogram("tomography needs two-detector histograms".into()));
        }
    }
    let a = hist_100_0.pooled(options.cutoff).to_table();
    let b = hist_0_100.pooled(options.cutoff).to_table();
    fit_source_tables(&a, &b, det, options)
}

/// [`fit_source`] on distributions rather than counts.
pub fn fit_source_tables(
    p_100_0: &FCTable,
    p_0_100: &FCTable,
    det: &DetectorModel,
    options: FitOptions,
) -> Result<TomographyFit> {
    det.validate()?;
    let cutoff = options.cutoff;
    let data = [boxed(p_100_0, cutoff), boxed(p_0_100, cutoff)];
    let distance = |x: &[f64]| -> Result<f64> {
        let eta = [x[1], x[2]];
        let mut sum = 0.0;
        for (t, measured) in [1.0, 0.0].into_iter().zip(&data) {
            let model = source_model(x[0], eta, t, *det).observed_distribution_gaussian(cutoff)?;
            sum += tvd(&boxed(&model, cutoff), measured)?;
        }
        Ok(0.5 * sum)
    };
    let objective = |x: &[f64]| distance(x).map_or(f64::NEG_INFINITY, |d| -d);
    let bounds = [(0.0, MAX_FIT_SQUEEZING), (0.0, 1.0), (0.0, 1.0)];
    let start = moment_start(&data[0], &data[1]);
    let first = nelder_mead(objective, &start, &bounds, options.simplex)?;
    let best = nelder_mead(objective, &first.argmax, &bounds, options.simplex)?;
    let best = if best.value >= first.value { best } else { first };
    let x = &best.argmax;
    let at_bounds = x.iter().zip(&bounds).any(|(&v, &(lo, hi))| v <= lo || v >= hi);
    Ok(TomographyFit {
        r: x[0],
        eta: [x[1], x[2]],
        residual_tvd: -best.value,
        converged: best.converged,
        at_bounds,
    })
}

/// Starting point from first and cross moments of a lossy two-mode squeezer:
/// `<n1 n2> / (<n1><n2>) = 2 + 1/sinh^2 r`.
fn moment_start(a: &FCTable, b: &FCTable) -> Vec<f64> {
    let mut m = [0.0; 3];
    let mut mass = 0.0;
    for (k, p) in a.iter().chain(b.iter()) {
        m[0] += p * k[0] as f64;
        m[1] += p * k[1] as f64;
        m[2] += p * (k[0] * k[1]) as f64;
        mass += p;
    }
    if mass <= 0.0 {
        return vec![0.5, 0.5, 0.5];
    }
    let (n1, n2, n12) = (m[0] / mass, m[1] / mass, m[2] / mass);
    let ratio = if n1 > 0.0 && n2 > 0.0 { n12 / (n1 * n2) } else { 0.0 };
    let s = if ratio > 2.05 { 1.0 / (ratio - 2.0) } else { 0.25 };
    let r = s.sqrt().asinh().clamp(0.01, MAX_FIT_SQUEEZING - 0.01);
    let s = r.sinh().powi(2);
    let eta = (0.5 * (n1 + n2) / s).clamp(0.05, 0.95);
    vec![r, eta, eta]
}

/// Squeezing at a given pump power under the quadratic power law.
pub fn pump_to_r(power_uw: f64, k: f64) -> Result<f64> {
    if !(power_uw >= 0.0 && power_uw.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "power",
            value: power_uw,
            reason: "must be finite and non-negative",
        });
    }
    Ok(k * power_uw.sqrt())
}

/// Pump power that produces squeezing `r`.
pub fn r_to_pump(r: f64, k: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k,
            reason: "must be positive",
        });
    }
    Ok((r / k).powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpFit {
    pub k: f64,
    /// Measured minus fitted squeezing, point by point.
    pub residuals: Vec<f64>,
    /// Residual standard deviation.
    pub sigma_r: f64,
}

/// Least-squares `k` in `r = k sqrt(P)`.
pub fn fit_pump_curve(points: &[(f64, f64)]) -> Result<PumpFit> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "points",
            value: points.len() as f64,
            reason: "needs at least two points",
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(p, r) in points {
        let sp = pump_to_r(p, 1.0)?;
        num += r * sp;
        den += p;
    }
    if den <= 0.0 {
        return Err(Error::Singular("all pump powers are zero"));
    }
    let k = num / den;
    let residuals: Vec<f64> = points.iter().map(|&(p, r)| r - k * p.sqrt()).collect();
    let sigma_r = (residuals.iter().map(|e| e * e).sum::<f64>() / (points.len() - 1) as f64).sqrt();
    Ok(PumpFit { k, residuals, sigma_r })
}

/// Points at or below `max_power_uw`, where the power law still holds.
pub fn plateau(points: &[(f64, f64)], max_power_uw: f64) -> Vec<(f64, f64)> {
    points.iter().copied().filter(|&(p, _)| p <= max_power_uw).collect()
}

/// Distinguishability from two-photon interference visibility.
pub fn hom_to_delta(visibility: f64) -> Result<f64> {
    check_unit_interval("visibility", visibility)?;
    Ok(1.0 - visibility)
}
