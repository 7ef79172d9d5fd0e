//! Gaussian-state models of quantum-optical vibronic spectroscopy.
//!
//! The crate builds ideal and imperfect two-mode squeezing experiments as
//! Gaussian circuits, computes their photon-number statistics (Franck-Condon
//! factors), bounds the error of an imperfect experiment through the state
//! fidelity, and optimizes the controllable parameters of the setup.
//!
//! A truncated Fock-space simulator in [`fock`] serves as an independent
//! oracle for the phase-space engine in [`gaussian`].

pub mod calibrate;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod gaussian;
pub mod histogram;
pub mod metrics;
pub mod optimize;
pub mod sampler;
pub mod table;
pub mod tropolone;
pub mod vibronic;

pub use nalgebra::Complex;

pub type Complex64 = Complex<f64>;

pub use error::{Error, Result};
pub use experiment::{DetectorModel, ExperimentModel, ParameterUncertainty, Source};
pub use gaussian::{fidelity, Element, GaussianCircuit, GaussianState};
pub use histogram::CountHistogram;
pub use metrics::{ClassicalBenchmark, ErrorBudget};
pub use table::FCTable;
pub use vibronic::{OpticalTarget, Spectrum, VibronicTransition};
