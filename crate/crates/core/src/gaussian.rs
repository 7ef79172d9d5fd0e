//! Phase-space description of multimode Gaussian states.
//!
//! Quadratures are ordered `(x_1 .. x_M, p_1 .. p_M)` with `hbar = 1`, so the
//! vacuum covariance is `I/2` and a coherent amplitude `alpha` sits at
//! `x = sqrt(2) Re(alpha)`, `p = sqrt(2) Im(alpha)`.
//!
//! Every transformation is written in the Heisenberg picture of the mode
//! operators: an element with annihilation-operator map `a -> U a + V a^dag`
//! sends the mean to `S mean` and the covariance to `S cov S^T`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{check_finite, check_unit_interval, Error, Result};
use crate::Complex64;

/// Tolerance on symplectic eigenvalues below 1/2 before a state is rejected.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Symplectic eigenvalues closer than this to 1/2 are treated as pure.
const PURITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state from a mean vector and covariance matrix.
    ///
    /// The covariance is symmetrized and checked for physicality.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(Error::NoModes);
        }
        if !dim.is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: dim + 1,
                found: dim,
            });
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: cov.nrows(),
            });
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let state = Self { mean, cov };
        state.check_physical()?;
        Ok(state)
    }

    pub fn vacuum(num_modes: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::NoModes);
        }
        let dim = 2 * num_modes;
        Ok(Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * 0.5,
        })
    }

    /// Product of coherent states with the given amplitudes.
    pub fn coherent(alphas: &[Complex64]) -> Result<Self> {
        let mut state = Self::vacuum(alphas.len())?;
        let m = alphas.len();
        for (k, a) in alphas.iter().enumerate() {
            state.mean[k] = std::f64::consts::SQRT_2 * a.re;
            state.mean[m + k] = std::f64::consts::SQRT_2 * a.im;
        }
        Ok(state)
    }

    /// Product of thermal states with the given mean photon numbers.
    pub fn thermal(mean_photons: &[f64]) -> Result<Self> {
        let mut state = Self::vacuum(mean_photons.len())?;
        let m = mean_photons.len();
        for (k, &n) in mean_photons.iter().enumerate() {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "mean_photons",
                    value: n,
                    reason: "must be finite and non-negative",
                });
            }
            state.cov[(k, k)] = n + 0.5;
            state.cov[(m + k, m + k)] = n + 0.5;
        }
        Ok(state)
    }

    pub fn num_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Complex displacement `<a_k>` of every mode.
    pub fn displacement(&self) -> Vec<Complex64> {
        let m = self.num_modes();
        (0..m)
            .map(|k| Complex64::new(self.mean[k], self.mean[m + k]) / std::f64::consts::SQRT_2)
            .collect()
    }

    pub fn apply(&self, elem: &Element) -> Result<Self> {
        elem.validate(self.num_modes())?;
        let mut next = self.clone();
        next.apply_in_place(elem);
        Ok(next)
    }

    fn apply_in_place(&mut self, elem: &Element) {
        let m = self.num_modes();
        match *elem {
            Element::Loss { mode, transmission } => {
                self.attenuate(mode, transmission.sqrt(), (1.0 - transmission) * 0.5)
            }
            Element::ThermalMix {
                mode,
                reflectivity,
                mean_photons,
            } => self.attenuate(
                mode,
                (1.0 - reflectivity).sqrt(),
                reflectivity * (mean_photons + 0.5),
            ),
            Element::Displace { mode, alpha } => {
                self.mean[mode] += std::f64::consts::SQRT_2 * alpha.re;
                self.mean[m + mode] += std::f64::consts::SQRT_2 * alpha.im;
            }
            _ => {
                let s = elem
                    .symplectic(m)
                    .expect("unitary elements always have a symplectic matrix");
                self.mean = &s * &self.mean;
                self.cov = &s * &self.cov * s.transpose();
                self.cov = (&self.cov + self.cov.transpose()) * 0.5;
            }
        }
    }

    // Scales one mode's quadratures by `amplitude` and adds isotropic noise.
    fn attenuate(&mut self, mode: usize, amplitude: f64, added_noise: f64) {
        let m = self.num_modes();
        for idx in [mode, m + mode] {
            self.mean[idx] *= amplitude;
            self.cov.row_mut(idx).scale_mut(amplitude);
            self.cov.column_mut(idx).scale_mut(amplitude);
        }
        self.cov[(mode, mode)] += added_noise;
        self.cov[(m + mode, m + mode)] += added_noise;
    }

    /// Mean photon number of one mode.
    pub fn mean_photon(&self, mode: usize) -> Result<f64> {
        let m = self.num_modes();
        if mode >= m {
            return Err(Error::InvalidMode {
                index: mode,
                num_modes: m,
            });
        }
        let (x, p) = (mode, m + mode);
        let trace = self.cov[(x, x)] + self.cov[(p, p)];
        let disp = self.mean[x].powi(2) + self.mean[p].powi(2);
        Ok(((trace - 1.0) * 0.5 + disp * 0.5).max(0.0))
    }

    pub fn total_mean_photon(&self) -> f64 {
        (0..self.num_modes())
            .map(|k| self.mean_photon(k).unwrap_or(0.0))
            .sum()
    }

    /// Williamson symplectic eigenvalues, ascending, one per mode.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(&self.cov)
    }

    fn check_physical(&self) -> Result<()> {
        let nus = self.symplectic_eigenvalues()?;
        let min = nus[0];
        if min < 0.5 - PHYSICALITY_TOL {
            return Err(Error::Unphysical { min_eigenvalue: min });
        }
        Ok(())
    }

    pub fn is_pure(&self) -> bool {
        self.symplectic_eigenvalues()
            .map(|nus| nus.iter().all(|&nu| nu - 0.5 < PURITY_TOL))
            .unwrap_or(false)
    }

    /// Largest absolute entry of the covariance difference.
    pub fn cov_distance(&self, other: &Self) -> f64 {
        (&self.cov - &other.cov).amax()
    }

    pub fn mean_distance(&self, other: &Self) -> f64 {
        (&self.mean - &other.mean).amax()
    }
}

/// The symplectic form `[[0, I], [-I, 0]]` in `(x.., p..)` ordering.
pub fn symplectic_form(num_modes: usize) -> DMatrix<f64> {
    let dim = 2 * num_modes;
    let mut omega = DMatrix::zeros(dim, dim);
    for k in 0..num_modes {
        omega[(k, num_modes + k)] = 1.0;
        omega[(num_modes + k, k)] = -1.0;
    }
    omega
}

/// Symplectic eigenvalues of a positive-definite covariance matrix.
///
/// With `cov = L L^T`, the antisymmetric `K = L^T Omega L` has eigenvalues
/// `±i nu_k`, so `K^T K` is symmetric with each `nu_k^2` appearing twice.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = cov.nrows();
    let chol = Cholesky::new(cov.clone()).ok_or(Error::Singular("covariance"))?;
    let l = chol.l();
    let k = l.transpose() * symplectic_form(dim / 2) * &l;
    let ktk = k.transpose() * &k;
    let ktk = (&ktk + ktk.transpose()) * 0.5;
    let mut sq: Vec<f64> = SymmetricEigen::new(ktk).eigenvalues.iter().copied().collect();
    sq.sort_by(f64::total_cmp);
    Ok(sq
        .chunks(2)
        .map(|pair| (0.5 * (pair[0] + pair[1])).max(0.0).sqrt())
        .collect())
}

/// Uhlmann fidelity `Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))` of two Gaussian states.
///
/// Uses the auxiliary-matrix form for mixed states. When either state is pure
/// the fidelity reduces to `sqrt(Tr rho1 rho2)`, which avoids the square-root
/// singularity of the general formula at symplectic eigenvalue 1/2.
pub fn fidelity(s1: &GaussianState, s2: &GaussianState) -> Result<f64> {
    if s1.num_modes() != s2.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: s1.num_modes(),
            found: s2.num_modes(),
        });
    }
    s1.check_physical()?;
    s2.check_physical()?;
    let m = s1.num_modes();
    let v1 = s1.cov();
    let v2 = s2.cov();
    let sigma = v1 + v2;
    let det_sigma = sigma.determinant();
    let sigma_inv = Cholesky::new(sigma)
        .ok_or(Error::Singular("sum of covariances"))?
        .inverse();
    let delta = s2.mean() - s1.mean();
    let gauss = (-0.25 * delta.dot(&(&sigma_inv * &delta))).exp();

    if s1.is_pure() || s2.is_pure() {
        return Ok((det_sigma.powf(-0.25) * gauss).clamp(0.0, 1.0));
    }

    let omega = symplectic_form(m);
    let v_aux = omega.transpose() * &sigma_inv * (&omega * 0.25 + v2 * &omega * v1);
    let a = &v_aux * &omega;
    let mut moduli: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(f64::total_cmp);
    let product: f64 = moduli
        .chunks(2)
        .map(|pair| {
            let nu = 0.5 * (pair[0] + pair[1]);
            2.0 * nu + (4.0 * nu * nu - 1.0).max(0.0).sqrt()
        })
        .product();
    Ok(((product / det_sigma.sqrt()).sqrt() * gauss).clamp(0.0, 1.0))
}

/// A single Gaussian operation on one or two modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    /// `a -> cosh(r) a - e^{i phase} sinh(r) a^dag`; at phase 0 this scales
    /// `x` by `e^{-r}` and `p` by `e^{r}`.
    Squeeze { mode: usize, r: f64, phase: f64 },
    /// `a_i -> cos(theta) a_i - e^{-i phase} sin(theta) a_j`,
    /// `a_j -> e^{i phase} sin(theta) a_i + cos(theta) a_j`.
    /// Intensity transmission is `cos^2(theta)`.
    BeamSplitter {
        i: usize,
        j: usize,
        theta: f64,
        phase: f64,
    },
    /// `a_i -> cosh(r) a_i + sinh(r) a_j^dag` and symmetrically for `a_j`.
    TwoModeSqueeze { i: usize, j: usize, r: f64 },
    Displace { mode: usize, alpha: Complex64 },
    /// Pure loss with intensity transmission `transmission`.
    Loss { mode: usize, transmission: f64 },
    /// Mixes the mode with a thermal mode of `mean_photons` on a beam splitter
    /// of intensity reflectivity `reflectivity`.
    ThermalMix {
        mode: usize,
        reflectivity: f64,
        mean_photons: f64,
    },
}

impl Element {
    pub fn squeeze(mode: usize, r: f64) -> Self {
        Element::Squeeze { mode, r, phase: 0.0 }
    }

    pub fn beam_splitter(i: usize, j: usize, theta: f64) -> Self {
        Element::BeamSplitter {
            i,
            j,
            theta,
            phase: 0.0,
        }
    }

    /// Modes touched by this element.
    pub fn modes(&self) -> Vec<usize> {
        match *self {
            Element::Squeeze { mode, .. }
            | Element::Displace { mode, .. }
            | Element::Loss { mode, .. }
            | Element::ThermalMix { mode, .. } => vec![mode],
            Element::BeamSplitter { i, j, .. } | Element::TwoModeSqueeze { i, j, .. } => {
                vec![i, j]
            }
        }
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(self, Element::Loss { .. } | Element::ThermalMix { .. })
    }

    pub fn validate(&self, num_modes: usize) -> Result<()> {
        for idx in self.modes() {
            if idx >= num_modes {
                return Err(Error::InvalidMode {
                    index: idx,
                    num_modes,
                });
            }
        }
        match *self {
            Element::Squeeze { r, phase, .. } => {
                check_finite("r", r)?;
                check_finite("phase", phase)
            }
            Element::BeamSplitter {
                i, j, theta, phase, ..
            } => {
                if i == j {
                    return Err(Error::InvalidParameter {
                        name: "beam splitter modes",
                        value: i as f64,
                        reason: "modes must differ",
                    });
                }
                check_finite("theta", theta)?;
                check_finite("phase", phase)
            }
            Element::TwoModeSqueeze { i, j, r } => {
                if i == j {
                    return Err(Error::InvalidParameter {
                        name: "two-mode squeezer modes",
                        value: i as f64,
                        reason: "modes must differ",
                    });
                }
                check_finite("r", r)
            }
            Element::Displace { alpha, .. } => {
                check_finite("alpha.re", alpha.re)?;
                check_finite("alpha.im", alpha.im)
            }
            Element::Loss { transmission, .. } => check_unit_interval("transmission", transmission),
            Element::ThermalMix {
                reflectivity,
                mean_photons,
                ..
            } => {
                check_unit_interval("reflectivity", reflectivity)?;
                if !(mean_photons >= 0.0 && mean_photons.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "mean_photons",
                        value: mean_photons,
                        reason: "must be finite and non-negative",
                    });
                }
                Ok(())
            }
        }
    }

    /// Symplectic matrix of a unitary element; `None` for channels and
    /// displacements.
    pub fn symplectic(&self, num_modes: usize) -> Option<DMatrix<f64>> {
        let m = num_modes;
        let mut s = DMatrix::identity(2 * m, 2 * m);
        match *self {
            Element::Squeeze { mode, r, phase } => {
                let (c, sh) = (r.cosh(), r.sinh());
                let (cp, sp) = (phase.cos(), phase.sin());
                let (x, p) = (mode, m + mode);
                s[(x, x)] = c - sh * cp;
                s[(x, p)] = -sh * sp;
                s[(p, x)] = -sh * sp;
                s[(p, p)] = c + sh * cp;
            }
            Element::BeamSplitter { i, j, theta, phase } => {
                let (c, sn) = (theta.cos(), theta.sin());
                // complex mode matrix U = X + iY acting on (a_i, a_j)
                let u = [
                    [Complex64::new(c, 0.0), -Complex64::from_polar(sn, -phase)],
                    [Complex64::from_polar(sn, phase), Complex64::new(c, 0.0)],
                ];
                let idx = [i, j];
                for (r_local, &row) in idx.iter().enumerate() {
                    for (c_local, &col) in idx.iter().enumerate() {
                        let z = u[r_local][c_local];
                        s[(row, col)] = z.re;
                        s[(row, m + col)] = -z.im;
                        s[(m + row, col)] = z.im;
                        s[(m + row, m + col)] = z.re;
                    }
                }
            }
            Element::TwoModeSqueeze { i, j, r } => {
                let (c, sh) = (r.cosh(), r.sinh());
                s[(i, i)] = c;
                s[(j, j)] = c;
                s[(i, j)] = sh;
                s[(j, i)] = sh;
                s[(m + i, m + i)] = c;
                s[(m + j, m + j)] = c;
                s[(m + i, m + j)] = -sh;
                s[(m + j, m + i)] = -sh;
            }
            _ => return None,
        }
        Some(s)
    }
}

/// Ordered list of Gaussian elements acting on `num_modes` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCircuit {
    num_modes: usize,
    elements: Vec<Element>,
}

impl GaussianCircuit {
    pub fn new(num_modes: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::NoModes);
        }
        Ok(Self {
            num_modes,
            elements: Vec::new(),
        })
    }

    pub fn from_elements(num_modes: usize, elements: Vec<Element>) -> Result<Self> {
        let mut circuit = Self::new(num_modes)?;
        for elem in elements {
            circuit.push(elem)?;
        }
        Ok(circuit)
    }

    pub fn push(&mut self, elem: Element) -> Result<&mut Self> {
        elem.validate(self.num_modes)?;
        self.elements.push(elem);
        Ok(self)
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn is_unitary(&self) -> bool {
        self.elements.iter().all(Element::is_unitary)
    }

    /// Folds the elements over the vacuum.
    pub fn replay(&self) -> Result<GaussianState> {
        let mut state = GaussianState::vacuum(self.num_modes)?;
        for elem in &self.elements {
            state.apply_in_place(elem);
        }
        Ok(state)
    }
}
