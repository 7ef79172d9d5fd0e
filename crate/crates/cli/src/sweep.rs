//! Maximum achievable fidelity against balanced loss.

use serde::Serialize;
use vibsim_core::metrics::closest_classical;
use vibsim_core::optimize::{optimize_experiment, FreeParameters, NelderMeadOptions};
use vibsim_core::{DetectorModel, ExperimentModel, OpticalTarget, Result, Source};

use crate::error::{CliError, CliResult};

pub const DEFAULT_GRID: &str = "0:0.98:0.02";
pub const DEFAULT_DISTINGUISHABILITY: f64 = 0.06;
pub const CSV_HEADER: &str = "loss,f_smsv,f_smsv_noisydet,f_tmsv,f_tmsv_dist,classical_threshold";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curve {
    /// Single-mode squeezers with ideal detectors.
    Smsv,
    SmsvNoisyDetectors,
    /// Two-mode squeezer with noisy detectors.
    Tmsv,
    TmsvDistinguishable,
}

impl Curve {
    pub const ALL: [Curve; 4] = [
        Curve::Smsv,
        Curve::SmsvNoisyDetectors,
        Curve::Tmsv,
        Curve::TmsvDistinguishable,
    ];
}

#[derive(Debug, Clone, Copy)]
pub struct SweepSettings {
    pub detector: DetectorModel,
    pub distinguishability: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            detector: DetectorModel::default(),
            distinguishability: DEFAULT_DISTINGUISHABILITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub loss: f64,
    pub f_smsv: f64,
    pub f_smsv_noisydet: f64,
    pub f_tmsv: f64,
    pub f_tmsv_dist: f64,
    pub classical_threshold: f64,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.loss, self.f_smsv, self.f_smsv_noisydet, self.f_tmsv, self.f_tmsv_dist, self.classical_threshold
        )
    }
}

fn template(curve: Curve, target: &OpticalTarget, loss: f64, settings: &SweepSettings) -> Result<ExperimentModel> {
    let eta = 1.0 - loss;
    let ideal = ExperimentModel::ideal_for(target)?;
    let (source, bs_transmission, detector, distinguishability) = match curve {
        Curve::Smsv => (ideal.source, ideal.bs_transmission, DetectorModel::ideal(), 0.0),
        Curve::SmsvNoisyDetectors => (ideal.source, ideal.bs_transmission, settings.detector, 0.0),
        Curve::Tmsv => (Source::Tmsv { r: 0.5 }, 0.5, settings.detector, 0.0),
        Curve::TmsvDistinguishable => (
            Source::Tmsv { r: 0.5 },
            0.5,
            settings.detector,
            settings.distinguishability,
        ),
    };
    Ok(ExperimentModel {
        source,
        bs_transmission,
        eta_pre: [eta, eta],
        eta_post: [1.0, 1.0],
        distinguishability,
        detector,
    })
}

/// Best fidelity of one curve at one loss, re-optimizing squeezing and splitter.
pub fn max_fidelity(curve: Curve, target: &OpticalTarget, loss: f64, settings: &SweepSettings) -> Result<f64> {
    let model = template(curve, target, loss, settings)?;
    let opt = optimize_experiment(&model, target, FreeParameters::default(), NelderMeadOptions::default())?;
    Ok(opt.fidelity)
}

pub fn sweep_loss(target: &OpticalTarget, grid: &[f64], settings: &SweepSettings) -> Result<Vec<SweepRow>> {
    let classical = closest_classical(target)?.classical_fidelity;
    grid.iter()
        .map(|&loss| {
            let f = |c| max_fidelity(c, target, loss, settings);
            Ok(SweepRow {
                loss,
                f_smsv: f(Curve::Smsv)?,
                f_smsv_noisydet: f(Curve::SmsvNoisyDetectors)?,
                f_tmsv: f(Curve::Tmsv)?,
                f_tmsv_dist: f(Curve::TmsvDistinguishable)?,
                classical_threshold: classical,
            })
        })
        .collect()
}

/// Loss at which `curve` falls to `threshold`, by bisection on `[lo, hi]`.
pub fn crossing(
    curve: Curve,
    target: &OpticalTarget,
    threshold: f64,
    settings: &SweepSettings,
    (mut lo, mut hi): (f64, f64),
    tol: f64,
) -> Result<Option<f64>> {
    let above = |loss| max_fidelity(curve, target, loss, settings).map(|f| f >= threshold);
    if !above(lo)? || above(hi)? {
        return Ok(None);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if above(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Either `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = |what: &str| CliError::Input(format!("grid {spec:?}: {what}"));
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let values: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec.split(':').map(number).collect::<CliResult<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad("step must be positive and stop at least start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| start + k as f64 * step).collect()
    } else {
        spec.split(',').map(number).collect::<CliResult<_>>()?
    };
    if values.is_empty() || values.iter().any(|&l| !(0.0..1.0).contains(&l)) {
        return Err(bad("losses must lie in [0, 1)"));
    }
    Ok(values)
}
