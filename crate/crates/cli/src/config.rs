//! Run configuration: one JSON document per invocation.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use vibsim_core::calibrate::FitOptions;
use vibsim_core::sampler::StatErrorMethod;
use vibsim_core::vibronic::doktorov_decompose;
use vibsim_core::{ExperimentModel, OpticalTarget, ParameterUncertainty, VibronicTransition};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_CUTOFF: usize = 30;
pub const DEFAULT_MONTE_CARLO_SAMPLES: usize = 100;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub experiment: Option<ExperimentModel>,
    #[serde(default)]
    pub uncertainties: Option<ParameterUncertainty>,
    /// Optimize the controllable parameters before simulating.
    #[serde(default)]
    pub optimize: bool,
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Non-Gaussianity error added to the budget.
    #[serde(default)]
    pub eps_g: f64,
    #[serde(default = "default_mc_samples")]
    pub monte_carlo_samples: usize,
    #[serde(default)]
    pub stat_error: Option<StatErrorMethod>,
    #[serde(default)]
    pub fit: Option<FitOptions>,
    #[serde(default)]
    pub grid: Option<String>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_mc_samples() -> usize {
    DEFAULT_MONTE_CARLO_SAMPLES
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Normal-mode data; the optical target follows from the Doktorov operator.
    Transition {
        duschinsky: Vec<Vec<f64>>,
        ground_freqs: Vec<f64>,
        excited_freqs: Vec<f64>,
        #[serde(default)]
        displacement: Option<Vec<f64>>,
    },
    /// Two squeezers on one beam splitter.
    TwoMode {
        r1: f64,
        r2: f64,
        theta: f64,
        #[serde(default)]
        excited_freqs: Option<Vec<f64>>,
    },
}

pub struct ResolvedTarget {
    pub target: OpticalTarget,
    pub excited_freqs: Option<Vec<f64>>,
}

impl TargetSpec {
    pub fn resolve(&self) -> CliResult<ResolvedTarget> {
        match self {
            TargetSpec::Transition {
                duschinsky,
                ground_freqs,
                excited_freqs,
                displacement,
            } => {
                let m = ground_freqs.len();
                if duschinsky.len() != m || duschinsky.iter().any(|row| row.len() != m) {
                    return Err(CliError::Input(format!("duschinsky must be a {m}x{m} matrix")));
                }
                let transition = VibronicTransition::new(
                    DMatrix::from_fn(m, m, |i, j| duschinsky[i][j]),
                    DVector::from_column_slice(ground_freqs),
                    DVector::from_column_slice(excited_freqs),
                    displacement.as_deref().map(DVector::from_column_slice),
                )?;
                Ok(ResolvedTarget {
                    target: doktorov_decompose(&transition)?,
                    excited_freqs: Some(excited_freqs.clone()),
                })
            }
            TargetSpec::TwoMode {
                r1,
                r2,
                theta,
                excited_freqs,
            } => Ok(ResolvedTarget {
                target: OpticalTarget::two_mode(*r1, *r2, *theta)?,
                excited_freqs: excited_freqs.clone(),
            }),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
        if config.version != CONFIG_VERSION {
            return Err(CliError::Input(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                config.version
            )));
        }
        Ok(config)
    }

    pub fn target(&self) -> CliResult<ResolvedTarget> {
        self.target
            .as_ref()
            .ok_or_else(|| CliError::Input("config has no target".into()))?
            .resolve()
    }

    pub fn experiment(&self) -> CliResult<ExperimentModel> {
        let model = self
            .experiment
            .ok_or_else(|| CliError::Input("config has no experiment".into()))?;
        model.validate()?;
        Ok(model)
    }
}
