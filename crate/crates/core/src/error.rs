use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode count must be at least 1")]
    NoModes,
    #[error("mode index {index} out of range for {num_modes} modes")]
    InvalidMode { index: usize, num_modes: usize },
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unphysical state: smallest symplectic eigenvalue {min_eigenvalue} < 1/2")]
    Unphysical { min_eigenvalue: f64 },
    #[error("matrix is singular or not positive definite: {0}")]
    Singular(&'static str),
    #[error("truncation did not converge: tail mass {tail_mass:.3e} exceeds {tolerance:.1e}")]
    Unconverged { tail_mass: f64, tolerance: f64 },
    #[error("cutoff {cutoff} too small: column norm defect {defect:.3e}")]
    CutoffTooSmall { cutoff: usize, defect: f64 },
    #[error("optimizer did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("invalid histogram: {0}")]
    Histogram(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}
