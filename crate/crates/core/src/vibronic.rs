//! Vibronic transitions as optical circuits, Franck-Condon tables and spectra.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{photon_distribution, replay_fock_with, FockOptions};
use crate::gaussian::{Element, GaussianCircuit, GaussianState};
use crate::table::FCTable;
use crate::Complex64;

/// Largest accepted `||U^T U - I||` (max entry) for a Duschinsky matrix.
pub const ORTHOGONALITY_TOL: f64 = 1e-3;

/// Frequencies closer than this (cm^-1) are merged into one spectral peak.
pub const MERGE_TOL: f64 = 1e-9;

/// Harmonic model of a vibronic transition between two electronic states.
///
/// Excited-state normal coordinates are `q' = U q + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct VibronicTransition {
    duschinsky: DMatrix<f64>,
    ground_freqs: DVector<f64>,
    excited_freqs: DVector<f64>,
    displacement: DVector<f64>,
}

impl VibronicTransition {
    pub fn new(
        duschinsky: DMatrix<f64>,
        ground_freqs: DVector<f64>,
        excited_freqs: DVector<f64>,
        displacement: Option<DVector<f64>>,
    ) -> Result<Self> {
        let m = duschinsky.nrows();
        if m == 0 {
            return Err(Error::NoModes);
        }
        for len in [duschinsky.ncols(), ground_freqs.len(), excited_freqs.len()] {
            if len != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: len,
                });
            }
        }
        for &w in ground_freqs.iter().chain(excited_freqs.iter()) {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "frequency",
                    value: w,
                    reason: "must be positive",
                });
            }
        }
        let displacement = displacement.unwrap_or_else(|| DVector::zeros(m));
        if displacement.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: displacement.len(),
            });
        }
        let t = Self {
            duschinsky,
            ground_freqs,
            excited_freqs,
            displacement,
        };
        let defect = t.orthogonality_defect();
        if defect >= ORTHOGONALITY_TOL {
            return Err(Error::InvalidParameter {
                name: "duschinsky orthogonality defect",
                value: defect,
                reason: "U^T U must be within 1e-3 of identity",
            });
        }
        Ok(t)
    }

    pub fn num_modes(&self) -> usize {
        self.duschinsky.nrows()
    }

    pub fn duschinsky(&self) -> &DMatrix<f64> {
        &self.duschinsky
    }

    pub fn ground_freqs(&self) -> &DVector<f64> {
        &self.ground_freqs
    }

    pub fn excited_freqs(&self) -> &DVector<f64> {
        &self.excited_freqs
    }

    /// Largest entry of `|U^T U - I|`; values above `1e-6` deserve a warning.
    pub fn orthogonality_defect(&self) -> f64 {
        let m = self.num_modes();
        (self.duschinsky.transpose() * &self.duschinsky - DMatrix::identity(m, m)).amax()
    }

    /// Frequency-scaled Duschinsky matrix `J = diag(sqrt w') U diag(1/sqrt w)`.
    pub fn scaled_duschinsky(&self) -> DMatrix<f64> {
        let left = DMatrix::from_diagonal(&self.excited_freqs.map(f64::sqrt));
        let right = DMatrix::from_diagonal(&self.ground_freqs.map(|w| 1.0 / w.sqrt()));
        left * &self.duschinsky * right
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    DerivedFromTransition,
    DirectInput,
}

/// Squeezers on vacuum, then a passive interferometer, then displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalTarget {
    squeezing: Vec<f64>,
    interferometer: Vec<Element>,
    displacement: Vec<Complex64>,
    provenance: Provenance,
}

impl OpticalTarget {
    pub fn new(
        squeezing: Vec<f64>,
        interferometer: Vec<Element>,
        displacement: Vec<Complex64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let m = squeezing.len();
        if m == 0 {
            return Err(Error::NoModes);
        }
        if displacement.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: displacement.len(),
            });
        }
        for elem in &interferometer {
            if !matches!(elem, Element::BeamSplitter { .. }) {
                return Err(Error::InvalidParameter {
                    name: "interferometer element",
                    value: f64::NAN,
                    reason: "only beam splitters are passive elements",
                });
            }
            elem.validate(m)?;
        }
        for &r in &squeezing {
            crate::error::check_finite("squeezing", r)?;
        }
        Ok(Self {
            squeezing,
            interferometer,
            displacement,
            provenance,
        })
    }

    /// Two squeezed modes interfered on one beam splitter of angle `theta`.
    pub fn two_mode(r1: f64, r2: f64, theta: f64) -> Result<Self> {
        Self::new(
            vec![r1, r2],
            vec![Element::beam_splitter(0, 1, theta)],
            vec![Complex64::new(0.0, 0.0); 2],
            Provenance::DirectInput,
        )
    }

    pub fn num_modes(&self) -> usize {
        self.squeezing.len()
    }

    pub fn squeezing(&self) -> &[f64] {
        &self.squeezing
    }

    pub fn interferometer(&self) -> &[Element] {
        &self.interferometer
    }

    pub fn displacement(&self) -> &[Complex64] {
        &self.displacement
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Beam-splitter angle of a two-mode target with one splitter.
    pub fn beam_splitter_angle(&self) -> Option<f64> {
        match self.interferometer.as_slice() {
            [Element::BeamSplitter { theta, .. }] => Some(*theta),
            [] => Some(0.0),
            _ => None,
        }
    }

    pub fn circuit(&self) -> GaussianCircuit {
        let m = self.num_modes();
        let mut elements: Vec<Element> = self
            .squeezing
            .iter()
            .enumerate()
            .filter(|(_, &r)| r != 0.0)
            .map(|(k, &r)| Element::squeeze(k, r))
            .collect();
        elements.extend(self.interferometer.iter().copied());
        elements.extend(
            self.displacement
                .iter()
                .enumerate()
                .filter(|(_, a)| a.norm() > 0.0)
                .map(|(mode, &alpha)| Element::Displace { mode, alpha }),
        );
        GaussianCircuit::from_elements(m, elements).expect("target elements were validated")
    }

    pub fn state(&self) -> GaussianState {
        self.circuit()
            .replay()
            .expect("a target circuit is unitary on vacuum")
    }
}

/// Squeezers and beam splitters equivalent to the Doktorov operator.
///
/// With `J = O1 diag(s) O2^T` the excited-frame state of the ground-state
/// vacuum has covariance `(J J^T + J^-T J^-1) / 2`, so mode `k` carries
/// squeezing `-ln s_k` and the passive part is `O1`; `O2` acts on vacuum and
/// drops out. Columns of `O1` are matched to the mode holding their largest
/// entry, which makes the result follow any relabeling of the modes.
pub fn doktorov_decompose(t: &VibronicTransition) -> Result<OpticalTarget> {
    let m = t.num_modes();
    let j = t.scaled_duschinsky();
    let svd = SVD::new(j, true, false);
    let o1 = svd.u.ok_or(Error::Singular("scaled Duschinsky matrix"))?;
    let s = svd.singular_values;
    if s.iter().any(|&x| !(x > 1e-12)) {
        return Err(Error::Singular("scaled Duschinsky matrix"));
    }

    // greedy assignment of singular directions to modes
    let mut order = vec![usize::MAX; m];
    let mut used = vec![false; m];
    let mut candidates: Vec<(f64, usize, usize)> = (0..m)
        .flat_map(|col| (0..m).map(move |row| (col, row)))
        .map(|(col, row)| (o1[(row, col)].abs(), row, col))
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| (a.1, a.2).cmp(&(b.1, b.2))));
    for (_, row, col) in candidates {
        if order[row] == usize::MAX && !used[col] {
            order[row] = col;
            used[col] = true;
        }
    }
    let mut o = DMatrix::from_fn(m, m, |row, k| o1[(row, order[k])]);
    let squeezing: Vec<f64> = order.iter().map(|&col| -s[col].ln()).collect();
    // column signs are free on squeezed vacuum; make the diagonal non-negative
    for k in 0..m {
        if o[(k, k)] < 0.0 {
            o.column_mut(k).neg_mut();
        }
    }

    let interferometer = givens_decompose(&o);
    let displacement = t
        .displacement
        .iter()
        .map(|&d| Complex64::new(d / std::f64::consts::SQRT_2, 0.0))
        .collect();
    OpticalTarget::new(
        squeezing,
        interferometer,
        displacement,
        Provenance::DerivedFromTransition,
    )
}

/// Writes an orthogonal matrix as a product of nearest-neighbour beam
/// splitters, up to column sign flips.
///
/// Returned elements are in application order.
fn givens_decompose(o: &DMatrix<f64>) -> Vec<Element> {
    let m = o.nrows();
    let mut a = o.clone();
    let mut rotations = Vec::new();
    for col in 0..m {
        for row in (col + 1..m).rev() {
            let (x, y) = (a[(row - 1, col)], a[(row, col)]);
            if y.abs() < 1e-15 {
                continue;
            }
            let theta = y.atan2(x);
            let (c, s) = (theta.cos(), theta.sin());
            // rows (row-1, row) <- [[c, s], [-s, c]] applied from the left
            for k in 0..m {
                let (u, v) = (a[(row - 1, k)], a[(row, k)]);
                a[(row - 1, k)] = c * u + s * v;
                a[(row, k)] = -s * u + c * v;
            }
            rotations.push((row - 1, row, theta));
        }
    }
    // o = R_1^T R_2^T .. R_K^T diag(+-1); R_K^T acts first
    let single = rotations.len() == 1;
    rotations
        .into_iter()
        .rev()
        .map(|(i, j, theta)| {
            let theta = if single { normalize_angle(theta) } else { theta };
            Element::beam_splitter(i, j, theta)
        })
        .collect()
}

// A lone beam splitter at theta + pi differs from theta by a sign on both
// modes, which is a column-sign gauge of the interferometer.
fn normalize_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut t = theta.rem_euclid(PI);
    if t > PI / 2.0 {
        t -= PI;
    }
    t
}

/// Franck-Condon factors of a target from a Fock-space replay.
///
/// The returned table carries the truncation tail; callers decide whether it
/// is acceptable.
pub fn fc_factors(target: &OpticalTarget, cutoff: usize) -> Result<FCTable> {
    fc_factors_with(target, cutoff, FockOptions::default())
}

pub fn fc_factors_with(target: &OpticalTarget, cutoff: usize, options: FockOptions) -> Result<FCTable> {
    let rho = replay_fock_with(&target.circuit(), cutoff, options)?;
    Ok(photon_distribution(&rho))
}

/// Photon-number distribution of a Gaussian state on the `cutoff^M` box.
///
/// Density-matrix elements follow from the multidimensional Hermite
/// recursion `R_{k+e_i} = (g_i R_k + sum_j A_ij sqrt(k_j) R_{k-e_j}) / sqrt(k_i + 1)`
/// over `2M` indices with `g = b - A b*`, seeded with
/// `R_0 = exp(-b^dag Q^-1 b / 2) / sqrt(det Q)`.
pub fn gaussian_distribution(state: &GaussianState, cutoff: usize) -> Result<FCTable> {
    let m = state.num_modes();
    if cutoff < 1 {
        return Err(Error::InvalidParameter {
            name: "cutoff",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let n2 = 2 * m;
    let v = state.cov();
    let c = |re: f64| Complex64::new(re, 0.0);
    let i = Complex64::new(0.0, 1.0);

    let mut q = DMatrix::<Complex64>::identity(n2, n2);
    for a in 0..m {
        for b in 0..m {
            let (x, p) = (v[(a, b)], v[(m + a, m + b)]);
            let (xp, px) = (v[(a, m + b)], v[(m + a, b)]);
            let delta = if a == b { 1.0 } else { 0.0 };
            let adag_a = (c(x + p - delta) + i * (xp - px)) * 0.5;
            let a_a = (c(x - p) + i * (xp + px)) * 0.5;
            q[(a, b)] += adag_a.conj();
            q[(a, m + b)] += a_a;
            q[(m + a, b)] += a_a.conj();
            q[(m + a, m + b)] += adag_a;
        }
    }
    let q_inv = q
        .clone()
        .try_inverse()
        .ok_or(Error::Singular("husimi covariance"))?;
    let mut x = DMatrix::<Complex64>::zeros(n2, n2);
    for a in 0..m {
        x[(a, m + a)] = c(1.0);
        x[(m + a, a)] = c(1.0);
    }
    let a_mat = &x * (DMatrix::identity(n2, n2) - &q_inv).map(|z| z.conj());
    let alpha = state.displacement();
    let beta = DVector::from_iterator(n2, alpha.iter().copied().chain(alpha.iter().map(|z| z.conj())));
    let gamma = &beta - &a_mat * beta.map(|z| z.conj());
    let quad = (beta.adjoint() * &q_inv * &beta)[(0, 0)];
    let det = q.determinant();
    let r0 = (-quad * 0.5).exp() / det.sqrt();

    let size = cutoff.pow(n2 as u32);
    let strides: Vec<usize> = (0..n2).map(|d| cutoff.pow((n2 - 1 - d) as u32)).collect();
    let sqrt: Vec<f64> = (0..=cutoff).map(|k| (k as f64).sqrt()).collect();
    let mut r = vec![Complex64::new(0.0, 0.0); size];
    r[0] = r0;
    let mut digits = vec![0usize; n2];
    for flat in 1..size {
        // advance the mixed-radix counter
        let mut d = n2 - 1;
        loop {
            digits[d] += 1;
            if digits[d] < cutoff {
                break;
            }
            digits[d] = 0;
            d -= 1;
        }
        let lead = digits.iter().position(|&k| k > 0).expect("flat > 0");
        let prev = flat - strides[lead];
        let km = digits[lead] - 1;
        let mut acc = gamma[lead] * r[prev];
        for j in 0..n2 {
            let kj = if j == lead { km } else { digits[j] };
            if kj > 0 {
                acc += a_mat[(lead, j)] * sqrt[kj] * r[prev - strides[j]];
            }
        }
        r[flat] = acc / sqrt[km + 1];
    }

    let box_strides: Vec<usize> = (0..m).map(|d| cutoff.pow((m - 1 - d) as u32)).collect();
    let entries = (0..cutoff.pow(m as u32)).map(|g| {
        let occ: Vec<usize> = box_strides.iter().map(|&s| (g / s) % cutoff).collect();
        let flat: usize = occ
            .iter()
            .zip(&strides[..m])
            .chain(occ.iter().zip(&strides[m..]))
            .map(|(&k, &s)| k * s)
            .sum();
        (occ, r[flat].re.max(0.0))
    });
    FCTable::from_entries(m, cutoff, entries.filter(|(_, p)| *p > 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub frequency: f64,
    pub intensity: f64,
}

/// Stick spectrum: each outcome `m` sits at `sum_k m_k w'_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub peaks: Vec<Peak>,
}

pub fn spectrum(fc: &FCTable, excited_freqs: &[f64]) -> Result<Spectrum> {
    if excited_freqs.len() != fc.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: fc.num_modes(),
            found: excited_freqs.len(),
        });
    }
    let mut sticks: Vec<Peak> = fc
        .iter()
        .map(|(m, p)| Peak {
            frequency: m
                .iter()
                .zip(excited_freqs)
                .map(|(&k, &w)| k as f64 * w)
                .sum(),
            intensity: p,
        })
        .collect();
    sticks.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    let mut peaks: Vec<Peak> = Vec::new();
    for stick in sticks {
        match peaks.last_mut() {
            Some(last) if (stick.frequency - last.frequency).abs() <= MERGE_TOL => {
                last.intensity += stick.intensity
            }
            _ => peaks.push(stick),
        }
    }
    Ok(Spectrum { peaks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn transition(u: &[f64], w: &[f64], wp: &[f64]) -> VibronicTransition {
        let m = w.len();
        VibronicTransition::new(
            DMatrix::from_row_slice(m, m, u),
            DVector::from_row_slice(w),
            DVector::from_row_slice(wp),
            None,
        )
        .unwrap()
    }

    #[test]
    fn identity_transition_has_no_squeezing() {
        let t = transition(&[1.0, 0.0, 0.0, 1.0], &[150.0, 90.0], &[150.0, 90.0]);
        let target = doktorov_decompose(&t).unwrap();
        for &r in target.squeezing() {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-12);
        }
        for elem in target.interferometer() {
            if let Element::BeamSplitter { theta, .. } = elem {
                assert_abs_diff_eq!(*theta, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn frequency_change_gives_squeezing() {
        let rho = [0.3f64, -0.2];
        let w = [100.0, 200.0];
        let wp = [w[0] * (2.0 * rho[0]).exp(), w[1] * (2.0f64 * rho[1]).exp()];
        let t = transition(&[1.0, 0.0, 0.0, 1.0], &w, &wp);
        let target = doktorov_decompose(&t).unwrap();
        // s_k = sqrt(w'_k / w_k) = e^{rho_k}, so the squeezer is -rho_k
        assert_abs_diff_eq!(target.squeezing()[0], -rho[0], epsilon = 1e-12);
        assert_abs_diff_eq!(target.squeezing()[1], -rho[1], epsilon = 1e-12);
        // the state is the one of the frame change J = diag(e^rho)
        let state = target.state();
        assert_abs_diff_eq!(state.cov()[(0, 0)], 0.5 * (2.0 * rho[0]).exp(), epsilon = 1e-12);
    }

    #[test]
    fn decomposition_reproduces_frame_change_state() {
        let u = [0.8, 0.6, -0.6, 0.8];
        let t = transition(&u, &[50.0, 170.0], &[120.0, 95.0]);
        let target = doktorov_decompose(&t).unwrap();
        let j = t.scaled_duschinsky();
        let j_inv_t = j.clone().try_inverse().unwrap().transpose();
        let expected = (&j * j.transpose()) * 0.5;
        let expected_p = (&j_inv_t * j_inv_t.transpose()) * 0.5;
        let cov = target.state().cov().clone();
        assert!((cov.view((0, 0), (2, 2)) - expected).amax() < 1e-12);
        assert!((cov.view((2, 2), (2, 2)) - expected_p).amax() < 1e-12);
        assert!(cov.view((0, 2), (2, 2)).amax() < 1e-12);
    }

    #[test]
    fn singular_or_non_orthogonal_input_rejected() {
        let bad = VibronicTransition::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
            DVector::from_row_slice(&[1.0, 1.0]),
            DVector::from_row_slice(&[1.0, 1.0]),
            None,
        );
        assert!(bad.is_err());
        let neg = VibronicTransition::new(
            DMatrix::identity(1, 1),
            DVector::from_row_slice(&[-1.0]),
            DVector::from_row_slice(&[1.0]),
            None,
        );
        assert!(neg.is_err());
    }

    #[test]
    fn zero_squeezing_gives_vacuum_table() {
        let target = OpticalTarget::two_mode(0.0, 0.0, 0.3).unwrap();
        let table = fc_factors(&target, 8).unwrap();
        assert_abs_diff_eq!(table.get(&[0, 0]), 1.0, epsilon = 1e-14);
        assert!(table.tail_mass() < 1e-14);
    }

    #[test]
    fn gaussian_path_matches_vacuum_probability() {
        let target = OpticalTarget::two_mode(0.4, -0.6, 0.7).unwrap();
        let table = gaussian_distribution(&target.state(), 12).unwrap();
        let expected = 1.0 / (0.4f64.cosh() * 0.6f64.cosh());
        assert_abs_diff_eq!(table.get(&[0, 0]), expected, epsilon = 1e-12);
        assert!(table.odd_mass() < 1e-14);
    }

    #[test]
    fn spectrum_merges_degenerate_peaks() {
        let fc = FCTable::from_entries(
            2,
            4,
            [(vec![0, 0], 0.5), (vec![2, 0], 0.2), (vec![0, 2], 0.2), (vec![1, 1], 0.1)],
        )
        .unwrap();
        let s = spectrum(&fc, &[100.0, 100.0]).unwrap();
        assert_eq!(s.peaks.len(), 2);
        assert_abs_diff_eq!(s.peaks[1].frequency, 200.0);
        assert_abs_diff_eq!(s.peaks[1].intensity, 0.5, epsilon = 1e-15);

        let s = spectrum(&fc, &[176.0, 110.0]).unwrap();
        assert_eq!(s.peaks.len(), 4);
        assert_eq!(s.peaks[0].frequency, 0.0);
        let vac = spectrum(&FCTable::point(vec![0, 0]).unwrap(), &[176.0, 110.0]).unwrap();
        assert_eq!(vac.peaks, vec![Peak { frequency: 0.0, intensity: 1.0 }]);
        // 2 w1 = 352 and 3.2 w2 = 352 would merge, but no integer outcome hits 3.2
        let near = spectrum(&fc, &[176.0, 176.0 + 1e-6]).unwrap();
        assert_eq!(near.peaks.len(), 4);
    }
}
