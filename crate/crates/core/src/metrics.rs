//! Distances between count distributions, fidelity-based error bounds and
//! the classical benchmark.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::gaussian::{fidelity, GaussianState};
use crate::table::FCTable;
use crate::vibronic::OpticalTarget;

/// Total variation distance `(1/2) sum |p - q|`.
///
/// Unlisted mass of each table counts as one extra "residual" outcome.
pub fn tvd(p: &FCTable, q: &FCTable) -> Result<f64> {
    check_modes(p, q)?;
    let mut sum = 0.0;
    for (k, pk) in p.iter() {
        sum += (pk - q.get(k)).abs();
    }
    for (k, qk) in q.iter() {
        if !p.contains(k) {
            sum += qk.abs();
        }
    }
    sum += (p.tail_mass() - q.tail_mass()).abs();
    Ok(0.5 * sum)
}

/// Half the l1 distance over the given outcomes only.
pub fn tvd_on(p: &FCTable, q: &FCTable, outcomes: &[Vec<usize>]) -> Result<f64> {
    check_modes(p, q)?;
    Ok(0.5 * outcomes.iter().map(|o| (p.get(o) - q.get(o)).abs()).sum::<f64>())
}

fn check_modes(p: &FCTable, q: &FCTable) -> Result<()> {
    if p.num_modes() != q.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: p.num_modes(),
            found: q.num_modes(),
        });
    }
    Ok(())
}

/// Upper bound `sqrt(1 - F^2)` on the trace distance of states with fidelity `F`.
pub fn trace_bound(f: f64) -> Result<f64> {
    check_unit_interval("fidelity", f)?;
    Ok((1.0 - f * f).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub fidelity: f64,
    pub fidelity_bound: f64,
    pub eps_stat: f64,
    pub eps_g: f64,
    pub total: f64,
}

/// Bound on the distance between measured and ideal count statistics:
/// the fidelity term plus sampling and non-Gaussianity errors.
pub fn total_bound(f: f64, eps_stat: f64, eps_g: f64) -> Result<ErrorBudget> {
    for (name, v) in [("eps_stat", eps_stat), ("eps_g", eps_g)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                reason: "must be finite and non-negative",
            });
        }
    }
    let fidelity_bound = trace_bound(f)?;
    Ok(ErrorBudget {
        fidelity: f,
        fidelity_bound,
        eps_stat,
        eps_g,
        total: fidelity_bound + eps_stat + eps_g,
    })
}

/// The classical state closest to a target and how well it does.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalBenchmark {
    pub classical_state: GaussianState,
    pub classical_fidelity: f64,
    pub classical_bound: f64,
}

/// Coherent state carrying the target's displacement.
///
/// Fidelity is unitarily invariant and the interferometer maps coherent
/// states to coherent states, so the closest classical state to squeezed
/// displaced inputs is the coherent state of the same displacement.
pub fn closest_classical(target: &OpticalTarget) -> Result<ClassicalBenchmark> {
    let state = target.state();
    let classical_state = GaussianState::coherent(&state.displacement())?;
    let classical_fidelity = fidelity(&classical_state, &state)?;
    Ok(ClassicalBenchmark {
        classical_bound: trace_bound(classical_fidelity)?,
        classical_state,
        classical_fidelity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub passes: bool,
    pub margin: f64,
    pub margin_sigmas: f64,
}

/// An experiment beats the classical benchmark when its fidelity is strictly
/// higher; the margin is also expressed in units of the fidelity uncertainty.
pub fn witness(f_exp: f64, sigma_f: f64, bench: &ClassicalBenchmark) -> Result<Witness> {
    if !(sigma_f > 0.0 && sigma_f.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sigma_f",
            value: sigma_f,
            reason: "must be positive",
        });
    }
    let margin = f_exp - bench.classical_fidelity;
    Ok(Witness {
        passes: margin > 0.0,
        margin,
        margin_sigmas: margin / sigma_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Element;
    use crate::vibronic::Provenance;
    use crate::Complex64;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tvd_basics() {
        let a = FCTable::point(vec![0, 0]).unwrap();
        let b = FCTable::point(vec![1, 0]).unwrap();
        assert_eq!(tvd(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(tvd(&a, &b).unwrap(), 1.0);
        let c = FCTable::from_entries(2, 2, [(vec![0, 0], 0.5)]).unwrap();
        // residual 0.5 against none
        assert_abs_diff_eq!(tvd(&a, &c).unwrap(), 0.5);
        assert_abs_diff_eq!(tvd(&c, &a).unwrap(), 0.5);
        assert!(tvd(&a, &FCTable::point(vec![0]).unwrap()).is_err());
    }

    #[test]
    fn listed_outcome_distance() {
        let p = FCTable::from_entries(1, 3, [(vec![0], 0.6), (vec![1], 0.3)]).unwrap();
        let q = FCTable::from_entries(1, 3, [(vec![0], 0.5), (vec![2], 0.3)]).unwrap();
        assert_abs_diff_eq!(tvd_on(&p, &q, &[vec![0], vec![1]]).unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(tvd(&p, &q).unwrap(), 0.5 * (0.1 + 0.3 + 0.3 + 0.1), epsilon = 1e-15);
    }

    #[test]
    fn trace_bound_values() {
        assert_eq!(trace_bound(1.0).unwrap(), 0.0);
        assert_eq!(trace_bound(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(trace_bound(0.879).unwrap(), 0.4768, epsilon = 1e-4);
        assert!(trace_bound(1.1).is_err());
    }

    #[test]
    fn budget_sums() {
        let b = total_bound(0.890, 0.0, 0.001).unwrap();
        assert_abs_diff_eq!(b.total, b.fidelity_bound + b.eps_stat + b.eps_g, epsilon = 1e-12);
        assert_abs_diff_eq!(b.total, 0.457, epsilon = 1e-3);
        assert_eq!(total_bound(1.0, 0.0, 0.0).unwrap().total, 0.0);
        assert!(total_bound(0.9, -0.1, 0.0).is_err());
    }

    #[test]
    fn classical_state_keeps_displacement() {
        let alpha = Complex64::new(0.3, -0.4);
        let coherent = OpticalTarget::new(vec![0.0], vec![], vec![alpha], Provenance::DirectInput).unwrap();
        let bench = closest_classical(&coherent).unwrap();
        assert_abs_diff_eq!(bench.classical_fidelity, 1.0, epsilon = 1e-12);

        let squeezed =
            OpticalTarget::new(vec![0.5], vec![], vec![alpha], Provenance::DirectInput).unwrap();
        let bench = closest_classical(&squeezed).unwrap();
        assert!(bench.classical_state.mean_distance(&squeezed.state()) < 1e-12);
        let vac = GaussianState::vacuum(1).unwrap();
        assert!(bench.classical_state.cov_distance(&vac) < 1e-15);
        assert_abs_diff_eq!(bench.classical_fidelity, 1.0 / 0.5f64.cosh().sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn witness_boundaries() {
        let target = OpticalTarget::new(
            vec![0.19, 0.72],
            vec![Element::beam_splitter(0, 1, 0.3)],
            vec![Complex64::new(0.0, 0.0); 2],
            Provenance::DirectInput,
        )
        .unwrap();
        let mut bench = closest_classical(&target).unwrap();
        bench.classical_fidelity = 0.879;
        let w = witness(0.890, 0.001, &bench).unwrap();
        assert!(w.passes);
        assert_abs_diff_eq!(w.margin_sigmas, 11.0, epsilon = 1e-9);
        assert!(!witness(0.879, 0.001, &bench).unwrap().passes);
        assert!(!witness(0.5, 0.01, &bench).unwrap().passes);
        assert!(witness(0.9, 0.0, &bench).is_err());
    }
}
