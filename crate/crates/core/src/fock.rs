//! Truncated Fock-space simulation of Gaussian circuits.
//!
//! Every element is expanded into exact matrix elements on a truncated
//! number basis (normal-ordered disentangling formulas for squeezers, exact
//! block exponentials for beam splitters, Laguerre polynomials for
//! displacements). Intermediate states live in a work space `pad` levels
//! larger than the requested cutoff, and the result is projected on the
//! `cutoff^M` output box; whatever is missing from the box is `tail_mass`.
//!
//! States are propagated as ensembles of vectors, one per Kraus branch, and
//! switch to a dense density matrix once the ensemble would outgrow it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::DetectorModel;
use crate::gaussian::{Element, GaussianCircuit};
use crate::table::FCTable;
use crate::Complex64;

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_PAD: usize = 10;

/// Eigenvalues below this are dropped when factoring a density matrix.
const RANK_TOL: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockOptions {
    pub pad: usize,
    pub tail_tolerance: f64,
}

impl Default for FockOptions {
    fn default() -> Self {
        Self {
            pad: DEFAULT_PAD,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }
}

/// A state on `cutoff^M` number states, mode 0 most significant.
#[derive(Debug, Clone)]
pub struct FockDensity {
    num_modes: usize,
    cutoff: usize,
    repr: Repr,
    tail_mass: f64,
    tail_tolerance: f64,
}

#[derive(Debug, Clone)]
enum Repr {
    /// `rho = F F^dag`; one column for a pure state.
    Factor(DMatrix<Complex64>),
    Dense(DMatrix<Complex64>),
}

impl FockDensity {
    pub fn from_pure(num_modes: usize, cutoff: usize, psi: DVector<Complex64>) -> Result<Self> {
        let n = psi.len();
        Self::from_factor(num_modes, cutoff, DMatrix::from_column_slice(n, 1, psi.as_slice()))
    }

    /// The state `F F^dag`.
    pub fn from_factor(num_modes: usize, cutoff: usize, factor: DMatrix<Complex64>) -> Result<Self> {
        check_shape(num_modes, cutoff, factor.nrows())?;
        let trace = factor.norm_squared();
        Ok(Self {
            num_modes,
            cutoff,
            repr: Repr::Factor(factor),
            tail_mass: (1.0 - trace).max(0.0),
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        })
    }

    pub fn from_matrix(num_modes: usize, cutoff: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        check_shape(num_modes, cutoff, matrix.nrows())?;
        if matrix.ncols() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let matrix = (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let trace = matrix.trace().re;
        Ok(Self {
            num_modes,
            cutoff,
            repr: Repr::Dense(matrix),
            tail_mass: (1.0 - trace).max(0.0),
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        })
    }

    pub fn vacuum(num_modes: usize, cutoff: usize) -> Result<Self> {
        let dim = box_size(num_modes, cutoff)?;
        let mut psi = DVector::zeros(dim);
        psi[0] = Complex64::new(1.0, 0.0);
        Self::from_pure(num_modes, cutoff, psi)
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// The density matrix.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        match &self.repr {
            Repr::Factor(f) => f * f.adjoint(),
            Repr::Dense(m) => m.clone(),
        }
    }

    /// Populations of the number states.
    pub fn diagonal(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Factor(f) => f.row_iter().map(|row| row.norm_squared()).collect(),
            Repr::Dense(m) => m.diagonal().iter().map(|z| z.re).collect(),
        }
    }

    /// State vector when the state is known to be pure.
    pub fn state_vector(&self) -> Option<DVector<Complex64>> {
        match &self.repr {
            Repr::Factor(f) if f.ncols() == 1 => Some(f.column(0).into_owned()),
            _ => None,
        }
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn converged(&self) -> bool {
        self.tail_mass < self.tail_tolerance
    }

    /// Fails with [`Error::Unconverged`] when the tail exceeds the tolerance.
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged() {
            Ok(self)
        } else {
            Err(Error::Unconverged {
                tail_mass: self.tail_mass,
                tolerance: self.tail_tolerance,
            })
        }
    }

    /// Occupation numbers of a flat basis index.
    pub fn occupation(&self, index: usize) -> Vec<usize> {
        occupation(index, self.num_modes, self.cutoff)
    }

    /// `F` with `rho = F F^dag`, dropping negligible eigenvalues.
    fn factor(&self) -> DMatrix<Complex64> {
        let matrix = match &self.repr {
            Repr::Factor(f) => return f.clone(),
            Repr::Dense(m) => m,
        };
        let eig = SymmetricEigen::new(matrix.clone());
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&k| eig.eigenvalues[k] > RANK_TOL)
            .collect();
        let mut f = DMatrix::zeros(matrix.nrows(), keep.len().max(1));
        for (col, &k) in keep.iter().enumerate() {
            let scale = Complex64::new(eig.eigenvalues[k].sqrt(), 0.0);
            f.set_column(col, &(eig.eigenvectors.column(k) * scale));
        }
        f
    }
}

fn check_shape(num_modes: usize, cutoff: usize, dim: usize) -> Result<()> {
    let expected = box_size(num_modes, cutoff)?;
    if dim != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: dim,
        });
    }
    Ok(())
}

fn box_size(num_modes: usize, cutoff: usize) -> Result<usize> {
    if num_modes == 0 {
        return Err(Error::NoModes);
    }
    if cutoff < 2 {
        return Err(Error::InvalidParameter {
            name: "cutoff",
            value: cutoff as f64,
            reason: "must be at least 2",
        });
    }
    Ok(cutoff.pow(num_modes as u32))
}

fn occupation(mut index: usize, num_modes: usize, dim: usize) -> Vec<usize> {
    let mut occ = vec![0; num_modes];
    for k in (0..num_modes).rev() {
        occ[k] = index % dim;
        index /= dim;
    }
    occ
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = vec![0.0; n + 1];
    for k in 1..=n {
        table[k] = table[k - 1] + (k as f64).ln();
    }
    table
}

/// Matrix elements of an operator acting on one or two modes, indexed by
/// local occupation (`n` for one mode, `n_i * dim + n_j` for two).
#[derive(Debug, Clone)]
struct LocalOp {
    modes: Vec<usize>,
    entries: Vec<(usize, usize, Complex64)>,
}

impl LocalOp {
    fn from_dense(mode: usize, m: &DMatrix<Complex64>) -> Self {
        let mut entries = Vec::new();
        for col in 0..m.ncols() {
            for row in 0..m.nrows() {
                let z = m[(row, col)];
                if z != ZERO {
                    entries.push((row, col, z));
                }
            }
        }
        Self {
            modes: vec![mode],
            entries,
        }
    }

    fn prepare(&self, num_modes: usize, dim: usize) -> PreparedOp {
        let stride = |k: usize| dim.pow((num_modes - 1 - k) as u32);
        let offset = |local: usize| -> usize {
            match self.modes.as_slice() {
                [k] => local * stride(*k),
                [i, j] => (local / dim) * stride(*i) + (local % dim) * stride(*j),
                _ => unreachable!("local operators act on one or two modes"),
            }
        };
        let size = dim.pow(num_modes as u32);
        let bases = (0..size)
            .filter(|&g| {
                let occ = occupation(g, num_modes, dim);
                self.modes.iter().all(|&k| occ[k] == 0)
            })
            .collect();
        let entries = self
            .entries
            .iter()
            .map(|&(out, inp, z)| (offset(out), offset(inp), z))
            .collect();
        PreparedOp { bases, entries }
    }
}

struct PreparedOp {
    bases: Vec<usize>,
    entries: Vec<(usize, usize, Complex64)>,
}

impl PreparedOp {
    fn apply(&self, input: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
        for &b in &self.bases {
            for &(o, i, z) in &self.entries {
                let x = input[b + i];
                if x != ZERO {
                    out[b + o] += z * x;
                }
            }
        }
    }

    fn left(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = rho.nrows();
        let mut out = DMatrix::zeros(d, d);
        out.as_mut_slice()
            .par_chunks_mut(d)
            .zip(rho.as_slice().par_chunks(d))
            .for_each(|(o, i)| self.apply(i, o));
        out
    }

    /// `K rho K^dag` for Hermitian `rho`.
    fn conjugate(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let x = self.left(rho);
        self.left(&x.adjoint())
    }
}

fn squeeze_matrix(r: f64, phase: f64, dim: usize, lnf: &[f64]) -> DMatrix<Complex64> {
    // S = exp(-tau/2 a^dag^2) cosh(r)^-(n+1/2) exp(conj(tau)/2 a^2), tau = e^{i phase} tanh r
    let tau = Complex64::from_polar(r.tanh(), phase);
    let ln_cosh = r.cosh().ln();
    let mut m = DMatrix::zeros(dim, dim);
    for n in 0..dim {
        for k in (n % 2..=n).step_by(2) {
            let j = (n - k) / 2;
            // <k| exp(conj(tau)/2 a^2) |n>
            let right = (tau.conj() * 0.5).powu(j as u32)
                * (0.5 * (lnf[n] - lnf[k]) - lnf[j]).exp();
            let middle = (-(k as f64 + 0.5) * ln_cosh).exp();
            for mm in (k..dim).step_by(2) {
                let i = (mm - k) / 2;
                let left = (-tau * 0.5).powu(i as u32) * (0.5 * (lnf[mm] - lnf[k]) - lnf[i]).exp();
                m[(mm, n)] += left * right * middle;
            }
        }
    }
    m
}

fn displace_matrix(alpha: Complex64, dim: usize, lnf: &[f64]) -> DMatrix<Complex64> {
    if alpha == ZERO {
        return DMatrix::identity(dim, dim);
    }
    let x = alpha.norm_sqr();
    let gauss = (-0.5 * x).exp();
    let ln_abs = alpha.norm().ln();
    let mut m = DMatrix::zeros(dim, dim);
    for row in 0..dim {
        for col in 0..dim {
            let (lo, hi) = (row.min(col), row.max(col));
            let order = hi - lo;
            let lag = laguerre(lo, order as f64, x);
            let mag = (0.5 * (lnf[lo] - lnf[hi]) + order as f64 * ln_abs).exp();
            let phase = if row >= col {
                Complex64::from_polar(1.0, alpha.arg() * order as f64)
            } else {
                Complex64::from_polar(1.0, (-alpha.conj()).arg() * order as f64)
            };
            m[(row, col)] = phase * (mag * gauss * lag);
        }
    }
    m
}

/// Generalized Laguerre polynomial `L_n^(a)(x)`.
fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Beam-splitter amplitudes within the block of `total` photons:
/// entry `(p, k)` is `<p, total-p| U |k, total-k>`.
fn beam_splitter_block(theta: f64, phase: f64, total: usize) -> DMatrix<Complex64> {
    let n = total + 1;
    if theta == 0.0 {
        return DMatrix::identity(n, n);
    }
    // H = i G with G = e^{i phase} a_i a_j^dag - e^{-i phase} a_i^dag a_j
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    let i = Complex64::new(0.0, 1.0);
    for k in 0..total {
        let amp = (((k + 1) * (total - k)) as f64).sqrt();
        let g_up = Complex64::from_polar(amp, phase); // G[k][k+1]
        h[(k, k + 1)] = i * g_up;
        h[(k + 1, k)] = (i * g_up).conj();
    }
    let eig = SymmetricEigen::new(h);
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -theta * l)));
    v * d * v.adjoint()
}

fn beam_splitter_op(i: usize, j: usize, theta: f64, phase: f64, dim: usize) -> LocalOp {
    let mut entries = Vec::new();
    for total in 0..=2 * (dim - 1) {
        let block = beam_splitter_block(theta, phase, total);
        let range = total.saturating_sub(dim - 1)..=total.min(dim - 1);
        for k in range.clone() {
            for p in range.clone() {
                let z = block[(p, k)];
                if z.norm_sqr() > 1e-300 {
                    entries.push((p * dim + (total - p), k * dim + (total - k), z));
                }
            }
        }
    }
    LocalOp {
        modes: vec![i, j],
        entries,
    }
}

fn two_mode_squeeze_op(i: usize, j: usize, r: f64, dim: usize, lnf: &[f64]) -> LocalOp {
    // exp(tau a^dag b^dag) cosh(r)^-(n_a + n_b + 1) exp(-tau a b), tau = tanh r
    let tau = r.tanh();
    let ln_cosh = r.cosh().ln();
    let mut entries = Vec::new();
    for k in 0..dim {
        for l in 0..dim {
            let mut column = vec![0.0; dim * dim];
            for jj in 0..=k.min(l) {
                let (k1, l1) = (k - jj, l - jj);
                let right = (-tau).powi(jj as i32)
                    * (0.5 * (lnf[k] + lnf[l] - lnf[k1] - lnf[l1]) - lnf[jj]).exp();
                let middle = (-((k1 + l1) as f64 + 1.0) * ln_cosh).exp();
                for ii in 0..dim - k1.max(l1) {
                    let left = tau.powi(ii as i32)
                        * (0.5 * (lnf[k1 + ii] + lnf[l1 + ii] - lnf[k1] - lnf[l1]) - lnf[ii]).exp();
                    column[(k1 + ii) * dim + (l1 + ii)] += left * middle * right;
                }
            }
            for (out, &z) in column.iter().enumerate() {
                if z != 0.0 {
                    entries.push((out, k * dim + l, Complex64::new(z, 0.0)));
                }
            }
        }
    }
    LocalOp {
        modes: vec![i, j],
        entries,
    }
}

/// Kraus operators of the pure-loss channel,
/// `K_k = sum_n sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k><n|`.
fn loss_kraus(mode: usize, eta: f64, dim: usize, lnf: &[f64]) -> Vec<LocalOp> {
    if eta >= 1.0 {
        return vec![LocalOp::from_dense(mode, &DMatrix::identity(dim, dim))];
    }
    (0..dim)
        .map(|k| {
            let entries = (k..dim)
                .filter_map(|n| {
                    let ln_c = lnf[n] - lnf[k] - lnf[n - k];
                    let ln_w = ln_c + xlogy((n - k) as f64, eta) + xlogy(k as f64, 1.0 - eta);
                    let z = (0.5 * ln_w).exp();
                    (z > 0.0).then(|| (n - k, n, Complex64::new(z, 0.0)))
                })
                .collect();
            LocalOp {
                modes: vec![mode],
                entries,
            }
        })
        .filter(|op| op.entries.iter().any(|e| e.2.norm_sqr() > 1e-32))
        .collect()
}

/// Kraus operators of the quantum-limited amplifier of gain `gain >= 1`,
/// `A_k = sum_n sqrt(C(n+k,k)) gain^(-(n+1)/2) (1 - 1/gain)^(k/2) |n+k><n|`.
fn amplifier_kraus(mode: usize, gain: f64, dim: usize, lnf: &[f64]) -> Vec<LocalOp> {
    if gain <= 1.0 {
        return vec![LocalOp::from_dense(mode, &DMatrix::identity(dim, dim))];
    }
    let ln_g = gain.ln();
    let ln_q = (1.0 - 1.0 / gain).ln();
    (0..dim)
        .map(|k| {
            let entries = (0..dim - k)
                .map(|n| {
                    let ln_c = lnf[n + k] - lnf[k] - lnf[n];
                    let ln_w = ln_c - (n as f64 + 1.0) * ln_g + k as f64 * ln_q;
                    (n + k, n, Complex64::new((0.5 * ln_w).exp(), 0.0))
                })
                .collect();
            LocalOp {
                modes: vec![mode],
                entries,
            }
        })
        .filter(|op| op.entries.iter().any(|e| e.2.norm_sqr() > 1e-32))
        .collect()
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn unitary_op(elem: &Element, dim: usize, lnf: &[f64]) -> Option<LocalOp> {
    match *elem {
        Element::Squeeze { mode, r, phase } => Some(LocalOp::from_dense(
            mode,
            &squeeze_matrix(r, phase, dim, lnf),
        )),
        Element::Displace { mode, alpha } => {
            Some(LocalOp::from_dense(mode, &displace_matrix(alpha, dim, lnf)))
        }
        Element::BeamSplitter { i, j, theta, phase } => {
            Some(beam_splitter_op(i, j, theta, phase, dim))
        }
        Element::TwoModeSqueeze { i, j, r } => Some(two_mode_squeeze_op(i, j, r, dim, lnf)),
        Element::Loss { .. } | Element::ThermalMix { .. } => None,
    }
}

/// Kraus decomposition of a channel element.
///
/// The thermal mixer with reflectivity `delta` and mean photon number `n` is
/// the attenuator with transmission `(1 - delta) / (1 + delta n)` followed by
/// the amplifier of gain `1 + delta n`; both act identically on all moments.
fn channel_kraus(elem: &Element, dim: usize, lnf: &[f64]) -> Vec<Vec<LocalOp>> {
    match *elem {
        Element::Loss { mode, transmission } => vec![loss_kraus(mode, transmission, dim, lnf)],
        Element::ThermalMix {
            mode,
            reflectivity,
            mean_photons,
        } => {
            let gain = 1.0 + reflectivity * mean_photons;
            let eta = (1.0 - reflectivity) / gain;
            vec![
                loss_kraus(mode, eta, dim, lnf),
                amplifier_kraus(mode, gain, dim, lnf),
            ]
        }
        _ => Vec::new(),
    }
}

/// Dense matrix of a unitary element on the full `cutoff^M` space.
///
/// Fails with [`Error::CutoffTooSmall`] when the image of the vacuum loses
/// more than `1e-3` of its norm to truncation.
pub fn element_matrix(elem: &Element, num_modes: usize, cutoff: usize) -> Result<DMatrix<Complex64>> {
    let size = box_size(num_modes, cutoff)?;
    elem.validate(num_modes)?;
    let lnf = ln_factorials(2 * cutoff + 2);
    let op = unitary_op(elem, cutoff, &lnf).ok_or(Error::InvalidParameter {
        name: "element",
        value: f64::NAN,
        reason: "channels have no unitary matrix",
    })?;
    let prepared = op.prepare(num_modes, cutoff);
    let mut m = DMatrix::zeros(size, size);
    let mut basis = vec![ZERO; size];
    let mut out = vec![ZERO; size];
    for col in 0..size {
        basis[col] = Complex64::new(1.0, 0.0);
        prepared.apply(&basis, &mut out);
        m.column_mut(col).copy_from_slice(&out);
        basis[col] = ZERO;
    }
    let defect = 1.0 - m.column(0).norm_squared();
    if defect > 1e-3 {
        return Err(Error::CutoffTooSmall { cutoff, defect });
    }
    Ok(m)
}

/// Branches of a Kraus unravelling lighter than this are dropped.
const BRANCH_TOL: f64 = 1e-18;

enum WorkState {
    /// `rho = sum_k |psi_k><psi_k|`.
    Ensemble(Vec<Vec<Complex64>>),
    Dense(DMatrix<Complex64>),
}

impl WorkState {
    fn into_dense(self, size: usize) -> DMatrix<Complex64> {
        match self {
            WorkState::Dense(rho) => rho,
            WorkState::Ensemble(psis) => {
                let f = DMatrix::from_fn(size, psis.len(), |g, k| psis[k][g]);
                &f * f.adjoint()
            }
        }
    }
}

/// Replays a circuit on the vacuum with the default options.
pub fn replay_fock(circuit: &GaussianCircuit, cutoff: usize) -> Result<FockDensity> {
    replay_fock_with(circuit, cutoff, FockOptions::default())
}

/// Mixed states are carried as an ensemble of Kraus branches while that is
/// smaller than the dense matrix, and as the dense matrix afterwards.
pub fn replay_fock_with(
    circuit: &GaussianCircuit,
    cutoff: usize,
    options: FockOptions,
) -> Result<FockDensity> {
    let m = circuit.num_modes();
    box_size(m, cutoff)?;
    let dim = cutoff + options.pad;
    let size = dim.pow(m as u32);
    let lnf = ln_factorials(2 * dim + 2);

    let mut vac = vec![ZERO; size];
    vac[0] = Complex64::new(1.0, 0.0);
    let mut state = WorkState::Ensemble(vec![vac]);

    for elem in circuit.elements() {
        if let Some(op) = unitary_op(elem, dim, &lnf) {
            let prepared = op.prepare(m, dim);
            state = match state {
                WorkState::Ensemble(psis) => WorkState::Ensemble(
                    psis.par_iter()
                        .map(|psi| {
                            let mut out = vec![ZERO; size];
                            prepared.apply(psi, &mut out);
                            out
                        })
                        .collect(),
                ),
                WorkState::Dense(rho) => WorkState::Dense(prepared.conjugate(&rho)),
            };
            continue;
        }
        for kraus in channel_kraus(elem, dim, &lnf) {
            let ops: Vec<PreparedOp> = kraus.iter().map(|op| op.prepare(m, dim)).collect();
            state = match state {
                WorkState::Ensemble(psis) if 4 * psis.len() * ops.len() <= size => {
                    let branches = psis
                        .par_iter()
                        .flat_map_iter(|psi| {
                            ops.iter().filter_map(move |op| {
                                let mut out = vec![ZERO; size];
                                op.apply(psi, &mut out);
                                let weight: f64 = out.iter().map(|z| z.norm_sqr()).sum();
                                (weight > BRANCH_TOL).then_some(out)
                            })
                        })
                        .collect();
                    WorkState::Ensemble(branches)
                }
                other => {
                    let rho = other.into_dense(size);
                    let mut next = DMatrix::zeros(size, size);
                    for op in &ops {
                        next += op.conjugate(&rho);
                    }
                    WorkState::Dense(next)
                }
            };
        }
    }

    let keep: Vec<usize> = (0..size)
        .filter(|&g| occupation(g, m, dim).iter().all(|&n| n < cutoff))
        .collect();
    let mut density = match state {
        WorkState::Ensemble(psis) => {
            let f = DMatrix::from_fn(keep.len(), psis.len(), |a, k| psis[k][keep[a]]);
            FockDensity::from_factor(m, cutoff, f)?
        }
        WorkState::Dense(rho) => {
            let sub = DMatrix::from_fn(keep.len(), keep.len(), |a, b| rho[(keep[a], keep[b])]);
            FockDensity::from_matrix(m, cutoff, sub)?
        }
    };
    density.tail_tolerance = options.tail_tolerance;
    Ok(density)
}

/// Diagonal of the density matrix keyed by occupation numbers.
pub fn photon_distribution(rho: &FockDensity) -> FCTable {
    let entries = rho
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(g, p)| (rho.occupation(g), p.max(0.0)))
        .filter(|(_, p)| *p > 0.0);
    FCTable::from_entries(rho.num_modes, rho.cutoff, entries)
        .expect("diagonal of a physical density matrix is a sub-normalized distribution")
}

/// Uhlmann fidelity `Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))` of truncated states.
///
/// With `rho_i = F_i F_i^dag` the fidelity is the trace norm of `F_1^dag F_2`.
pub fn fidelity_fock(a: &FockDensity, b: &FockDensity) -> Result<f64> {
    if a.num_modes != b.num_modes || a.cutoff != b.cutoff {
        return Err(Error::DimensionMismatch {
            expected: box_size(a.num_modes, a.cutoff)?,
            found: box_size(b.num_modes, b.cutoff)?,
        });
    }
    let overlap = a.factor().adjoint() * b.factor();
    let f: f64 = overlap
        .singular_values()
        .iter()
        .sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Photon-count distribution of a single noisy detector given zero signal.
///
/// Dark counts follow a thermal distribution with `P(n >= 1) = dark_p1`;
/// pump leakage adds two counts with probability `pump_p2`.
pub fn detector_noise_kernel(det: &DetectorModel) -> Vec<f64> {
    let q = det.dark_p1;
    let mut dark = vec![1.0 - q];
    while q > 0.0 && *dark.last().unwrap() > 1e-17 {
        let next = dark.last().unwrap() * q;
        dark.push(next);
    }
    let mut kernel = vec![0.0; dark.len() + 2];
    for (k, &p) in dark.iter().enumerate() {
        kernel[k] += p * (1.0 - det.pump_p2);
        kernel[k + 2] += p * det.pump_p2;
    }
    while kernel.len() > 1 && *kernel.last().unwrap() == 0.0 {
        kernel.pop();
    }
    kernel
}

/// Convolves every detector's count with the noise kernel.
pub fn convolve_detector_noise(table: &FCTable, det: &DetectorModel) -> FCTable {
    let kernel = detector_noise_kernel(det);
    let mut current: Vec<(Vec<usize>, f64)> = table.iter().map(|(k, p)| (k.to_vec(), p)).collect();
    for mode in 0..table.num_modes() {
        let mut next = std::collections::BTreeMap::new();
        for (outcome, p) in &current {
            for (extra, &w) in kernel.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let mut o = outcome.clone();
                o[mode] += extra;
                *next.entry(o).or_insert(0.0) += p * w;
            }
        }
        current = next.into_iter().collect();
    }
    FCTable::from_entries(table.num_modes(), table.cutoff(), current)
        .expect("convolution with a normalized kernel preserves mass")
}

pub fn attach_detector_noise(rho: &FockDensity, det: &DetectorModel) -> FCTable {
    convolve_detector_noise(&photon_distribution(rho), det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identities() {
        let id = DMatrix::<Complex64>::identity(36, 36);
        let s = element_matrix(&Element::squeeze(0, 0.0), 2, 6).unwrap();
        assert!((s - &id).camax() < 1e-15);
        let d = element_matrix(&Element::Displace { mode: 1, alpha: ZERO }, 2, 6).unwrap();
        assert!((d - &id).camax() < 1e-15);
        let b = element_matrix(&Element::beam_splitter(0, 1, 0.0), 2, 6).unwrap();
        assert!((b - &id).camax() < 1e-15);
    }

    #[test]
    fn beam_splitter_single_photon() {
        let cutoff = 4;
        let u = element_matrix(&Element::beam_splitter(0, 1, FRAC_PI_4), 2, cutoff).unwrap();
        let ket10 = cutoff;
        let ket01 = 1;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u[(ket10, ket10)] - c(s)).norm() < 1e-10);
        assert!((u[(ket01, ket10)] - c(s)).norm() < 1e-10);
        // Hong-Ou-Mandel: |1,1> never exits as |1,1>
        let ket11 = cutoff + 1;
        assert!(u[(ket11, ket11)].norm() < 1e-12);
    }

    #[test]
    fn unitary_blocks_are_unitary() {
        for total in [0, 1, 5, 17] {
            let b = beam_splitter_block(0.37, 0.8, total);
            let id = DMatrix::<Complex64>::identity(total + 1, total + 1);
            assert!((b.adjoint() * &b - id).camax() < 1e-12);
        }
    }

    #[test]
    fn squeezed_vacuum_photon_number() {
        let circuit = GaussianCircuit::from_elements(1, vec![Element::squeeze(0, 0.72)]).unwrap();
        let rho = replay_fock(&circuit, 30).unwrap();
        let mean: f64 = photon_distribution(&rho).iter().map(|(k, p)| k[0] as f64 * p).sum();
        assert_abs_diff_eq!(mean, 0.72f64.sinh().powi(2), epsilon = 1e-5);
        assert!(rho.converged());
    }

    #[test]
    fn displaced_vacuum_is_poissonian() {
        let alpha = Complex64::new(0.6, -0.8);
        let circuit =
            GaussianCircuit::from_elements(1, vec![Element::Displace { mode: 0, alpha }]).unwrap();
        let table = photon_distribution(&replay_fock(&circuit, 20).unwrap());
        let lnf = ln_factorials(20);
        for n in 0..10 {
            let poisson = (-1.0f64).exp() * (-lnf[n]).exp();
            assert_abs_diff_eq!(table.get(&[n]), poisson, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_circuit_is_vacuum() {
        let rho = replay_fock(&GaussianCircuit::new(2).unwrap(), 5).unwrap();
        let table = photon_distribution(&rho);
        assert_eq!(table.len(), 1);
        assert_eq!(table.get(&[0, 0]), 1.0);
    }

    #[test]
    fn thermal_mix_on_vacuum_gives_thermal_state() {
        let (delta, nbar) = (0.3, 1.5);
        let circuit = GaussianCircuit::from_elements(
            1,
            vec![Element::ThermalMix {
                mode: 0,
                reflectivity: delta,
                mean_photons: nbar,
            }],
        )
        .unwrap();
        let table = photon_distribution(&replay_fock(&circuit, 30).unwrap());
        let n = delta * nbar;
        for k in 0..8 {
            let expected = n.powi(k as i32) / (1.0 + n).powi(k as i32 + 1);
            assert_abs_diff_eq!(table.get(&[k]), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn lossy_tmsv_matches_closed_form() {
        // TMSV statistics P(n, n) = (1 - l) l^n with l = tanh^2 r, then
        // independent binomial thinning in each arm
        let (r, eta) = (0.1f64, 0.5f64);
        let circuit = GaussianCircuit::from_elements(
            2,
            vec![
                Element::TwoModeSqueeze { i: 0, j: 1, r },
                Element::Loss {
                    mode: 0,
                    transmission: eta,
                },
                Element::Loss {
                    mode: 1,
                    transmission: eta,
                },
            ],
        )
        .unwrap();
        let table = photon_distribution(&replay_fock(&circuit, 12).unwrap());
        let l = r.tanh().powi(2);
        let lnf = ln_factorials(80);
        let binom = |n: usize, k: usize| {
            (lnf[n] - lnf[k] - lnf[n - k]).exp() * eta.powi(k as i32) * (1.0 - eta).powi((n - k) as i32)
        };
        for a in 0..6 {
            for b in 0..6 {
                let expected: f64 = (a.max(b)..60)
                    .map(|n| (1.0 - l) * l.powi(n as i32) * binom(n, a) * binom(n, b))
                    .sum();
                assert_abs_diff_eq!(table.get(&[a, b]), expected, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn fidelity_of_pure_states_is_overlap() {
        let circuit_a = GaussianCircuit::from_elements(1, vec![Element::squeeze(0, 0.4)]).unwrap();
        let a = replay_fock(&circuit_a, 25).unwrap();
        let vac = FockDensity::vacuum(1, 25).unwrap();
        let overlap = a.state_vector().unwrap()[0].norm();
        assert_abs_diff_eq!(fidelity_fock(&a, &vac).unwrap(), overlap, epsilon = 1e-12);
        assert_abs_diff_eq!(overlap, 1.0 / 0.4f64.cosh().sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(fidelity_fock(&a, &a).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn detector_noise_on_vacuum() {
        let vac = FockDensity::vacuum(2, 4).unwrap();
        let quiet = DetectorModel {
            dark_p1: 0.0,
            pump_p2: 0.0,
            ..DetectorModel::default()
        };
        let clean = attach_detector_noise(&vac, &quiet);
        assert_eq!(clean.get(&[0, 0]), 1.0);

        let dark = DetectorModel {
            dark_p1: 0.002,
            pump_p2: 0.0,
            ..DetectorModel::default()
        };
        let noisy = attach_detector_noise(&vac, &dark);
        let p1: f64 = noisy.iter().filter(|(k, _)| k[0] == 1).map(|(_, p)| p).sum();
        assert_abs_diff_eq!(p1, 0.002, epsilon = 5e-6);

        let pump = DetectorModel {
            dark_p1: 0.0,
            pump_p2: 0.001,
            ..DetectorModel::default()
        };
        let leaked = attach_detector_noise(&vac, &pump);
        assert_abs_diff_eq!(leaked.get(&[2, 0]), 0.001 * 0.999, epsilon = 1e-15);
        assert_abs_diff_eq!(leaked.total(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn kraus_families_are_complete() {
        let dim = 48;
        let lnf = ln_factorials(100);
        for ops in [loss_kraus(0, 0.37, dim, &lnf), amplifier_kraus(0, 1.4, dim, &lnf)] {
            // sum_k K^dag K restricted to low occupations equals identity
            let mut acc = DMatrix::<f64>::zeros(dim, dim);
            for op in &ops {
                let mut k = DMatrix::<f64>::zeros(dim, dim);
                for &(o, i, z) in &op.entries {
                    k[(o, i)] = z.re;
                }
                acc += k.transpose() * k;
            }
            assert_abs_diff_eq!(acc[(0, 0)], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(acc[(1, 1)], 1.0, epsilon = 1e-12);
        }
    }
}
