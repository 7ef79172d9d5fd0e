//! Two-mode model of an imperfect squeezed-light experiment.
//!
//! The source feeds two modes that pick up distinguishability noise and loss,
//! interfere on a tunable beam splitter, lose more light and are counted by
//! noisy number-resolving detectors.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::fock::{convolve_detector_noise, photon_distribution, replay_fock_with, FockOptions};
use crate::gaussian::{fidelity, Element, GaussianCircuit, GaussianState};
use crate::table::FCTable;
use crate::vibronic::{gaussian_distribution, OpticalTarget};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// Two independent single-mode squeezers.
    SmsvPair { r1: f64, r2: f64 },
    /// One two-mode squeezer across both modes.
    Tmsv { r: f64 },
}

impl Source {
    /// Mean photon number emitted into each mode.
    pub fn mean_photons(&self) -> [f64; 2] {
        match *self {
            Source::SmsvPair { r1, r2 } => [r1.sinh().powi(2), r2.sinh().powi(2)],
            Source::Tmsv { r } => [r.sinh().powi(2); 2],
        }
    }

    fn elements(&self) -> Vec<Element> {
        match *self {
            Source::SmsvPair { r1, r2 } => [(0, r1), (1, r2)]
                .into_iter()
                .filter(|&(_, r)| r != 0.0)
                .map(|(k, r)| Element::squeeze(k, r))
                .collect(),
            Source::Tmsv { r } if r != 0.0 => vec![Element::TwoModeSqueeze { i: 0, j: 1, r }],
            Source::Tmsv { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    /// Probability that a dark count registers at least one photon.
    pub dark_p1: f64,
    /// Probability that leaked pump light registers as two photons.
    pub pump_p2: f64,
    /// Fidelity of the detector noise modes to vacuum, multiplied onto the
    /// optical fidelity.
    pub noise_fidelity_factor: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            dark_p1: 0.002,
            pump_p2: 0.001,
            noise_fidelity_factor: 0.9958,
        }
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self {
            dark_p1: 0.0,
            pump_p2: 0.0,
            noise_fidelity_factor: 1.0,
        }
    }

    /// A detector pair whose fidelity factor is computed from its own noise.
    ///
    /// Each noise mode is diagonal in the number basis, so its fidelity to
    /// vacuum is the square root of its zero-count probability. Two detectors
    /// give `sqrt(p0) * sqrt(p0) = p0`.
    pub fn from_noise(dark_p1: f64, pump_p2: f64) -> Self {
        let p0 = (1.0 - dark_p1) * (1.0 - pump_p2);
        Self {
            dark_p1,
            pump_p2,
            noise_fidelity_factor: p0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_interval("dark_p1", self.dark_p1)?;
        check_unit_interval("pump_p2", self.pump_p2)?;
        if !(self.noise_fidelity_factor > 0.0 && self.noise_fidelity_factor <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "noise_fidelity_factor",
                value: self.noise_fidelity_factor,
                reason: "must lie in (0, 1]",
            });
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.dark_p1 == 0.0 && self.pump_p2 == 0.0
    }
}

/// Standard deviations of the characterized parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParameterUncertainty {
    pub sigma_loss: f64,
    pub sigma_r: f64,
    pub sigma_delta: f64,
    pub sigma_t: f64,
}

impl Default for ParameterUncertainty {
    fn default() -> Self {
        Self {
            sigma_loss: 0.02,
            sigma_r: 0.01,
            sigma_delta: 0.02,
            sigma_t: 0.01,
        }
    }
}

impl ParameterUncertainty {
    pub fn zero() -> Self {
        Self {
            sigma_loss: 0.0,
            sigma_r: 0.0,
            sigma_delta: 0.0,
            sigma_t: 0.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sigma_loss: self.sigma_loss * factor,
            sigma_r: self.sigma_r * factor,
            sigma_delta: self.sigma_delta * factor,
            sigma_t: self.sigma_t * factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_loss", self.sigma_loss),
            ("sigma_r", self.sigma_r),
            ("sigma_delta", self.sigma_delta),
            ("sigma_t", self.sigma_t),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be finite and non-negative",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentModel {
    pub source: Source,
    /// Intensity transmission of the tunable beam splitter.
    pub bs_transmission: f64,
    /// Per-mode intensity transmission before the beam splitter.
    #[serde(default = "unit_pair")]
    pub eta_pre: [f64; 2],
    /// Per-mode intensity transmission after the beam splitter.
    #[serde(default = "unit_pair")]
    pub eta_post: [f64; 2],
    /// Fraction of each mode replaced by matched thermal noise.
    #[serde(default)]
    pub distinguishability: f64,
    #[serde(default)]
    pub detector: DetectorModel,
}

fn unit_pair() -> [f64; 2] {
    [1.0, 1.0]
}

impl ExperimentModel {
    /// Lossless, noiseless model with ideal detectors.
    pub fn ideal(source: Source, bs_transmission: f64) -> Self {
        Self {
            source,
            bs_transmission,
            eta_pre: [1.0, 1.0],
            eta_post: [1.0, 1.0],
            distinguishability: 0.0,
            detector: DetectorModel::ideal(),
        }
    }

    /// The ideal experiment whose output is the given two-mode target.
    ///
    /// A splitter angle outside `[0, pi/2]` is brought back by swapping the
    /// squeezers, since a quarter turn of the splitter exchanges the inputs.
    pub fn ideal_for(target: &OpticalTarget) -> Result<Self> {
        let theta = match (target.num_modes(), target.beam_splitter_angle()) {
            (2, Some(theta)) if target.displacement().iter().all(|a| a.norm() == 0.0) => theta,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "target",
                    value: target.num_modes() as f64,
                    reason: "needs two undisplaced modes and at most one beam splitter",
                })
            }
        };
        let (r1, r2) = (target.squeezing()[0], target.squeezing()[1]);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let wrapped = theta.rem_euclid(std::f64::consts::PI);
        let source = if wrapped <= half_pi {
            (Source::SmsvPair { r1, r2 }, wrapped)
        } else {
            (Source::SmsvPair { r1: r2, r2: r1 }, wrapped - half_pi)
        };
        Ok(Self::ideal(source.0, source.1.cos().powi(2)))
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_interval("bs_transmission", self.bs_transmission)?;
        for &eta in self.eta_pre.iter().chain(self.eta_post.iter()) {
            check_unit_interval("transmission", eta)?;
        }
        check_unit_interval("distinguishability", self.distinguishability)?;
        match self.source {
            Source::SmsvPair { r1, r2 } => {
                crate::error::check_finite("r1", r1)?;
                crate::error::check_finite("r2", r2)?;
            }
            Source::Tmsv { r } => crate::error::check_finite("r", r)?,
        }
        self.detector.validate()
    }

    /// Source, distinguishability noise, loss, beam splitter, loss.
    ///
    /// Trivial elements (zero noise, unit transmission) are left out.
    pub fn build_circuit(&self) -> Result<GaussianCircuit> {
        self.validate()?;
        let mut elements = self.source.elements();
        if self.distinguishability > 0.0 {
            for (mode, nbar) in self.source.mean_photons().into_iter().enumerate() {
                elements.push(Element::ThermalMix {
                    mode,
                    reflectivity: self.distinguishability,
                    mean_photons: nbar,
                });
            }
        }
        push_losses(&mut elements, self.eta_pre);
        let theta = self.bs_transmission.sqrt().acos();
        if theta != 0.0 {
            elements.push(Element::beam_splitter(0, 1, theta));
        }
        push_losses(&mut elements, self.eta_post);
        GaussianCircuit::from_elements(2, elements)
    }

    pub fn effective_state(&self) -> Result<GaussianState> {
        self.build_circuit()?.replay()
    }

    /// Optical fidelity to the target times the detector noise factor.
    pub fn model_fidelity(&self, target: &OpticalTarget) -> Result<f64> {
        self.model_fidelity_to(&target.state())
    }

    pub fn model_fidelity_to(&self, target_state: &GaussianState) -> Result<f64> {
        let f = fidelity(&self.effective_state()?, target_state)?;
        Ok(f * self.detector.noise_fidelity_factor)
    }

    /// Detector-level count statistics from a Fock-space replay.
    pub fn observed_distribution(&self, cutoff: usize) -> Result<FCTable> {
        let rho = replay_fock_with(&self.build_circuit()?, cutoff, FockOptions::default())?;
        Ok(convolve_detector_noise(&photon_distribution(&rho), &self.detector))
    }

    /// Same statistics as [`Self::observed_distribution`] through the
    /// phase-space recursion, which is much cheaper inside fits and sweeps.
    pub fn observed_distribution_gaussian(&self, cutoff: usize) -> Result<FCTable> {
        let table = gaussian_distribution(&self.effective_state()?, cutoff)?;
        Ok(convolve_detector_noise(&table, &self.detector))
    }

    /// Mean photon number summed over both output modes.
    pub fn total_mean_photons(&self) -> Result<f64> {
        Ok(self.effective_state()?.total_mean_photon())
    }
}

fn push_losses(elements: &mut Vec<Element>, eta: [f64; 2]) {
    for (mode, &transmission) in eta.iter().enumerate() {
        if transmission < 1.0 {
            elements.push(Element::Loss { mode, transmission });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ideal_model_reproduces_target() {
        let target = OpticalTarget::two_mode(0.19, 0.72, 0.436f64.asin()).unwrap();
        let model = ExperimentModel::ideal(Source::SmsvPair { r1: 0.19, r2: 0.72 }, 1.0 - 0.436 * 0.436);
        assert_abs_diff_eq!(model.model_fidelity(&target).unwrap(), 1.0, epsilon = 1e-9);
        let noisy = ExperimentModel {
            detector: DetectorModel::default(),
            ..model
        };
        assert_abs_diff_eq!(noisy.model_fidelity(&target).unwrap(), 0.9958, epsilon = 1e-9);
    }

    #[test]
    fn ideal_for_handles_negative_angles() {
        let target = OpticalTarget::two_mode(-0.72, 0.19, -0.3295).unwrap();
        let model = ExperimentModel::ideal_for(&target).unwrap();
        assert!((0.0..=1.0).contains(&model.bs_transmission));
        assert_abs_diff_eq!(model.model_fidelity(&target).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn balanced_tmsv_gives_two_smsv() {
        let r = 0.5;
        let model = ExperimentModel::ideal(Source::Tmsv { r }, 0.5);
        let smsv = ExperimentModel::ideal(Source::SmsvPair { r1: r, r2: -r }, 1.0);
        let a = model.effective_state().unwrap();
        let b = smsv.effective_state().unwrap();
        assert!(a.cov_distance(&b) < 1e-12);
    }

    #[test]
    fn loss_scales_photon_number() {
        let base = ExperimentModel::ideal(Source::Tmsv { r: 0.6 }, 0.7);
        let lossy = ExperimentModel {
            eta_post: [0.4, 0.4],
            ..base
        };
        assert_abs_diff_eq!(
            lossy.total_mean_photons().unwrap(),
            0.4 * base.total_mean_photons().unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn balanced_loss_commutes_through_splitter() {
        let pre = ExperimentModel {
            eta_pre: [0.55, 0.55],
            distinguishability: 0.06,
            ..ExperimentModel::ideal(Source::Tmsv { r: 0.4 }, 0.3)
        };
        let post = ExperimentModel {
            eta_pre: [1.0, 1.0],
            eta_post: [0.55, 0.55],
            ..pre
        };
        let a = pre.effective_state().unwrap();
        let b = post.effective_state().unwrap();
        assert!(a.cov_distance(&b) < 1e-12);
    }

    #[test]
    fn full_distinguishability_is_worse_than_vacuum() {
        let target = OpticalTarget::two_mode(0.19, 0.72, 0.436f64.asin()).unwrap();
        let thermal = ExperimentModel {
            distinguishability: 1.0,
            ..ExperimentModel::ideal(Source::SmsvPair { r1: 0.19, r2: 0.72 }, 0.81)
        };
        let vac = GaussianState::vacuum(2).unwrap();
        let f_vac = fidelity(&vac, &target.state()).unwrap();
        assert!(thermal.model_fidelity(&target).unwrap() < f_vac);
    }

    #[test]
    fn computed_noise_factor() {
        let det = DetectorModel::from_noise(0.002, 0.001);
        assert_abs_diff_eq!(det.noise_fidelity_factor, 0.998 * 0.999, epsilon = 1e-12);
    }

    #[test]
    fn invalid_models_rejected() {
        let mut m = ExperimentModel::ideal(Source::Tmsv { r: 0.3 }, 1.2);
        assert!(m.build_circuit().is_err());
        m.bs_transmission = 0.5;
        m.eta_pre = [1.1, 0.5];
        assert!(m.build_circuit().is_err());
        m.eta_pre = [1.0, 1.0];
        m.detector.noise_fidelity_factor = 0.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let m = ExperimentModel {
            eta_post: [0.4, 0.45],
            distinguishability: 0.06,
            ..ExperimentModel::ideal(Source::Tmsv { r: 0.3 }, 0.8)
        };
        let text = serde_json::to_string(&m).unwrap();
        let back: ExperimentModel = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
        let bad = r#"{"source":{"type":"tmsv","r":0.3},"bs_transmission":0.5,"colour":1}"#;
        assert!(serde_json::from_str::<ExperimentModel>(bad).is_err());
    }
}
