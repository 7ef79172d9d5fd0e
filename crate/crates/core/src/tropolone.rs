//! Reference data for the two coupled vibrational modes of the 370 nm
//! transition in tropolone, and the experiment that simulated it.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::experiment::{DetectorModel, ExperimentModel, Source};
use crate::table::FCTable;
use crate::vibronic::{doktorov_decompose, OpticalTarget, VibronicTransition};

pub const DUSCHINSKY: [[f64; 2]; 2] = [[0.9, 0.436], [-0.436, 0.9]];
/// Excited-state frequencies in cm^-1.
pub const EXCITED_FREQS: [f64; 2] = [176.0, 110.0];
/// Ground-state frequencies in cm^-1 for which the Doktorov operator has
/// squeezing magnitudes 0.19 and 0.72.
pub const GROUND_FREQS: [f64; 2] = [38.99399567, 172.04372756];
pub const SQUEEZING: [f64; 2] = [0.19, 0.72];
/// Sine of the beam-splitter angle.
pub const BS_SIN: f64 = 0.436;
pub const SAMPLES: u64 = 1_638_370;

pub const OUTCOMES: [[usize; 2]; 8] = [[0, 0], [1, 0], [0, 1], [2, 0], [0, 2], [1, 1], [4, 0], [3, 1]];
pub const EXPERIMENT: [f64; 8] = [0.9628, 0.0129, 0.0127, 0.0035, 0.0038, 0.0035, 0.0, 0.0];
pub const IDEAL: [f64; 8] = [0.7731, 0.0, 0.0, 0.1097, 0.0041, 0.0469, 0.0233, 0.0200];
pub const LOSSY_SMSV: [f64; 8] = [0.9327, 0.0377, 0.0073, 0.0136, 0.0004, 0.0053, 0.0004, 0.0003];
pub const BEST_SMSV: [f64; 8] = [0.7631, 0.0015, 0.0015, 0.1102, 0.0046, 0.0466, 0.0234, 0.0199];

pub const EXPERIMENT_FIDELITY: f64 = 0.890;
pub const LOSSY_SMSV_FIDELITY: f64 = 0.9068;
pub const BEST_SMSV_FIDELITY: f64 = 0.9958;
pub const EXPERIMENT_ERROR: f64 = 0.206;
pub const LOSSY_SMSV_ERROR: f64 = 0.195;
pub const BEST_SMSV_ERROR: f64 = 0.005;
pub const CLASSICAL_FIDELITY: f64 = 0.879;

/// Total loss of the characterized setup, split evenly between the arms.
pub const LOSS: f64 = 0.6;
pub const DISTINGUISHABILITY: f64 = 0.06;

pub fn outcomes() -> Vec<Vec<usize>> {
    OUTCOMES.iter().map(|o| o.to_vec()).collect()
}

/// One column of the reference tables; unlisted mass becomes the tail.
pub fn column(values: &[f64; 8]) -> FCTable {
    FCTable::from_entries(2, 5, outcomes().into_iter().zip(values.iter().copied()))
        .expect("reference columns sum to at most one")
}

pub fn transition() -> VibronicTransition {
    VibronicTransition::new(
        DMatrix::from_fn(2, 2, |i, j| DUSCHINSKY[i][j]),
        DVector::from_row_slice(&GROUND_FREQS),
        DVector::from_row_slice(&EXCITED_FREQS),
        None,
    )
    .expect("tropolone data is valid")
}

/// The target state derived from the transition.
pub fn target() -> Result<OpticalTarget> {
    doktorov_decompose(&transition())
}

/// Squeezers 0.19 and 0.72 on a splitter of angle `arcsin 0.436`, taken at
/// face value.
pub fn literal_target() -> OpticalTarget {
    OpticalTarget::two_mode(SQUEEZING[0], SQUEEZING[1], BS_SIN.asin()).expect("valid parameters")
}

/// The characterized experiment: a two-mode squeezer with balanced loss,
/// distinguishability noise and noisy detectors. Squeezing and splitter are
/// starting values for optimization.
pub fn characterized_model() -> ExperimentModel {
    let eta = 1.0 - LOSS;
    ExperimentModel {
        source: Source::Tmsv { r: 0.5 },
        bs_transmission: 0.5,
        eta_pre: [eta, eta],
        eta_post: [1.0, 1.0],
        distinguishability: DISTINGUISHABILITY,
        detector: DetectorModel::default(),
    }
}
