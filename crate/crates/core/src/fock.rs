//! Fock-basis states of the pump, signal and idler modes.
//!
//! Three-mode amplitudes are stored densely in a box `0..=n_x_max` per mode,
//! with the axis order fixed to (pump, signal, idler). Truncation never
//! renormalizes silently: the missing probability is reported as a norm
//! deficit and the only rescaling entry point is [`ThreeModeState::renormalize`].

use std::fmt;
use std::ops::{Index, IndexMut};

use ndarray::{Array1, Array2, Array3, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default probability budget for the top two shells of any mode.
pub const DEFAULT_LEAK_TOL: f64 = 1e-6;

/// Largest reduced basis [`partial_trace`] builds unless told otherwise.
pub const DEFAULT_MAX_DENSITY_DIM: usize = 4096;

/// Tolerance on `max |rho - rho^dagger|` accepted by [`DensityMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeLabel {
    Pump,
    Signal,
    Idler,
}

impl ModeLabel {
    pub const ALL: [ModeLabel; 3] = [ModeLabel::Pump, ModeLabel::Signal, ModeLabel::Idler];

    /// Tensor axis of this mode in a [`ThreeModeState`].
    pub fn axis(self) -> usize {
        match self {
            ModeLabel::Pump => 0,
            ModeLabel::Signal => 1,
            ModeLabel::Idler => 2,
        }
    }

    pub fn from_axis(axis: usize) -> Option<Self> {
        Self::ALL.get(axis).copied()
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ModeLabel::Pump => "pump",
            ModeLabel::Signal => "signal",
            ModeLabel::Idler => "idler",
        };
        f.write_str(name)
    }
}

/// One value per mode, indexable by [`ModeLabel`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerMode<T> {
    pub pump: T,
    pub signal: T,
    pub idler: T,
}

impl<T> PerMode<T> {
    pub fn from_fn(mut f: impl FnMut(ModeLabel) -> T) -> Self {
        PerMode {
            pump: f(ModeLabel::Pump),
            signal: f(ModeLabel::Signal),
            idler: f(ModeLabel::Idler),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerMode<U> {
        PerMode {
            pump: f(&self.pump),
            signal: f(&self.signal),
            idler: f(&self.idler),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeLabel, &T)> {
        [
            (ModeLabel::Pump, &self.pump),
            (ModeLabel::Signal, &self.signal),
            (ModeLabel::Idler, &self.idler),
        ]
        .into_iter()
    }
}

impl<T> Index<ModeLabel> for PerMode<T> {
    type Output = T;
    fn index(&self, mode: ModeLabel) -> &T {
        match mode {
            ModeLabel::Pump => &self.pump,
            ModeLabel::Signal => &self.signal,
            ModeLabel::Idler => &self.idler,
        }
    }
}

impl<T> IndexMut<ModeLabel> for PerMode<T> {
    fn index_mut(&mut self, mode: ModeLabel) -> &mut T {
        match mode {
            ModeLabel::Pump => &mut self.pump,
            ModeLabel::Signal => &mut self.signal,
            ModeLabel::Idler => &mut self.idler,
        }
    }
}

/// Per-mode Fock cutoffs and the leakage budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub n_p_max: usize,
    pub n_s_max: usize,
    pub n_i_max: usize,
    pub leak_tol: f64,
}

impl TruncationSpec {
    pub fn new(n_p_max: usize, n_s_max: usize, n_i_max: usize) -> Result<Self> {
        Self::with_leak_tol(n_p_max, n_s_max, n_i_max, DEFAULT_LEAK_TOL)
    }

    pub fn with_leak_tol(n_p_max: usize, n_s_max: usize, n_i_max: usize, leak_tol: f64) -> Result<Self> {
        if n_p_max < 1 || n_s_max < 1 || n_i_max < 1 {
            return Err(Error::InvalidTruncation(format!(
                "all cutoffs must be >= 1, got ({n_p_max}, {n_s_max}, {n_i_max})"
            )));
        }
        if !(leak_tol > 0.0 && leak_tol < 1.0) {
            return Err(Error::InvalidTruncation(format!(
                "leak_tol must lie in (0, 1), got {leak_tol}"
            )));
        }
        Ok(TruncationSpec {
            n_p_max,
            n_s_max,
            n_i_max,
            leak_tol,
        })
    }

    pub fn cutoff(&self, mode: ModeLabel) -> usize {
        match mode {
            ModeLabel::Pump => self.n_p_max,
            ModeLabel::Signal => self.n_s_max,
            ModeLabel::Idler => self.n_i_max,
        }
    }

    /// Fock dimension of a mode (`cutoff + 1`).
    pub fn dim(&self, mode: ModeLabel) -> usize {
        self.cutoff(mode) + 1
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_p_max + 1, self.n_s_max + 1, self.n_i_max + 1)
    }

    pub fn len(&self) -> usize {
        let (p, s, i) = self.shape();
        p * s * i
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major flat index of `(n_p, n_s, n_i)`.
    pub fn flat_index(&self, n_p: usize, n_s: usize, n_i: usize) -> Option<usize> {
        let (_, s, i) = self.shape();
        if n_p > self.n_p_max || n_s > self.n_s_max || n_i > self.n_i_max {
            return None;
        }
        Some((n_p * s + n_s) * i + n_i)
    }

    pub fn unflatten(&self, index: usize) -> Option<(usize, usize, usize)> {
        if index >= self.len() {
            return None;
        }
        let (_, s, i) = self.shape();
        Some((index / (s * i), (index / i) % s, index % i))
    }
}

/// Amplitudes `C[n_p, n_s, n_i]` of a pure three-mode state.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeModeState {
    amps: Array3<Complex64>,
    trunc: TruncationSpec,
}

impl ThreeModeState {
    pub fn from_amplitudes(amps: Array3<Complex64>, trunc: TruncationSpec) -> Result<Self> {
        if amps.dim() != trunc.shape() {
            return Err(Error::BasisMismatch(format!(
                "amplitude tensor {:?} does not match truncation {:?}",
                amps.dim(),
                trunc.shape()
            )));
        }
        Ok(ThreeModeState { amps, trunc })
    }

    pub fn vacuum(trunc: TruncationSpec) -> Self {
        let mut amps = Array3::zeros(trunc.shape());
        amps[[0, 0, 0]] = Complex64::new(1.0, 0.0);
        ThreeModeState { amps, trunc }
    }

    pub fn basis_state(trunc: TruncationSpec, n_p: usize, n_s: usize, n_i: usize) -> Result<Self> {
        if trunc.flat_index(n_p, n_s, n_i).is_none() {
            return Err(Error::InvalidArgument(format!(
                "|{n_p}, {n_s}, {n_i}> lies outside the truncation box"
            )));
        }
        let mut amps = Array3::zeros(trunc.shape());
        amps[[n_p, n_s, n_i]] = Complex64::new(1.0, 0.0);
        Ok(ThreeModeState { amps, trunc })
    }

    pub fn amplitudes(&self) -> &Array3<Complex64> {
        &self.amps
    }

    #[cfg(test)]
    pub(crate) fn amplitudes_mut(&mut self) -> &mut Array3<Complex64> {
        &mut self.amps
    }

    pub fn truncation(&self) -> &TruncationSpec {
        &self.trunc
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `1 - sum |C|^2`; positive when truncation cut probability away.
    pub fn norm_deficit(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    /// Rescales to unit norm and returns the norm squared before rescaling.
    pub fn renormalize(&mut self) -> Result<f64> {
        let n2 = self.norm_sqr();
        if n2 <= 0.0 {
            return Err(Error::InvalidArgument("cannot renormalize a zero state".into()));
        }
        log::info!(
            "renormalizing three-mode state: norm^2 = {n2:.15}, deficit = {:.3e}",
            1.0 - n2
        );
        let scale = 1.0 / n2.sqrt();
        self.amps.mapv_inplace(|c| c * scale);
        Ok(n2)
    }

    pub fn inner(&self, other: &ThreeModeState) -> Result<Complex64> {
        if self.trunc.shape() != other.trunc.shape() {
            return Err(Error::BasisMismatch("three-mode states with different cutoffs".into()));
        }
        Ok(self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &ThreeModeState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }
}

/// Amplitudes `c[n_1, n_2]` of a pure signal-idler state.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    amps: Array2<Complex64>,
}

impl TwoModeState {
    pub fn from_amplitudes(amps: Array2<Complex64>) -> Result<Self> {
        let (a, b) = amps.dim();
        if a < 2 || b < 2 {
            return Err(Error::InvalidTruncation(format!(
                "two-mode cutoffs must be >= 1, got shape ({a}, {b})"
            )));
        }
        Ok(TwoModeState { amps })
    }

    pub fn amplitudes(&self) -> &Array2<Complex64> {
        &self.amps
    }

    /// Cutoffs `(n_1_max, n_2_max)`.
    pub fn cutoffs(&self) -> (usize, usize) {
        let (a, b) = self.amps.dim();
        (a - 1, b - 1)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm_deficit(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    /// Joint photon-number distribution `|c(n_1, n_2)|^2`.
    pub fn joint_distribution(&self) -> Array2<f64> {
        self.amps.mapv(|c| c.norm_sqr())
    }

    /// Marginal photon-number distribution of the first (`0`) or second (`1`) mode.
    pub fn marginal(&self, which: usize) -> Vec<f64> {
        let joint = self.joint_distribution();
        let other = if which == 0 { Axis(1) } else { Axis(0) };
        joint.sum_axis(other).to_vec()
    }

    pub fn mean_total(&self) -> f64 {
        self.amps
            .indexed_iter()
            .map(|((n1, n2), c)| (n1 + n2) as f64 * c.norm_sqr())
            .sum()
    }

    /// Pure-state density over the (signal, idler) basis.
    pub fn density(&self) -> DensityMatrix {
        let v: Array1<Complex64> = self.amps.iter().copied().collect();
        let n = v.len();
        let mut rho = Array2::zeros((n, n));
        for (a, va) in v.iter().enumerate() {
            for (b, vb) in v.iter().enumerate() {
                rho[[a, b]] = va * vb.conj();
            }
        }
        let (d1, d2) = self.amps.dim();
        DensityMatrix {
            elements: rho,
            basis: Basis::new(vec![ModeLabel::Signal, ModeLabel::Idler], vec![d1, d2]),
        }
    }

    /// Reduced density of the first (`0`, signal) or second (`1`, idler) mode.
    pub fn reduced_density(&self, which: usize) -> DensityMatrix {
        let m = if which == 0 {
            self.amps.clone()
        } else {
            self.amps.t().to_owned()
        };
        let rho = gram(&m);
        let mode = if which == 0 {
            ModeLabel::Signal
        } else {
            ModeLabel::Idler
        };
        let d = rho.nrows();
        DensityMatrix {
            elements: rho,
            basis: Basis::new(vec![mode], vec![d]),
        }
    }

    /// Embeds this state as the (signal, idler) factor with the pump in `|n_p>`.
    pub fn embed_with_pump_fock(&self, n_p: usize, trunc: TruncationSpec) -> Result<ThreeModeState> {
        let (d1, d2) = self.amps.dim();
        if d1 != trunc.dim(ModeLabel::Signal) || d2 != trunc.dim(ModeLabel::Idler) || n_p > trunc.n_p_max {
            return Err(Error::BasisMismatch(
                "two-mode state does not fit the truncation".into(),
            ));
        }
        let mut amps = Array3::zeros(trunc.shape());
        amps.index_axis_mut(Axis(0), n_p).assign(&self.amps);
        ThreeModeState::from_amplitudes(amps, trunc)
    }
}

/// `|<a|b>|^2` for two-mode states on the same basis.
pub fn fidelity(a: &TwoModeState, b: &TwoModeState) -> Result<f64> {
    if a.amps.dim() != b.amps.dim() {
        return Err(Error::BasisMismatch(format!(
            "fidelity between shapes {:?} and {:?}",
            a.amps.dim(),
            b.amps.dim()
        )));
    }
    let overlap: Complex64 = a.amps.iter().zip(b.amps.iter()).map(|(x, y)| x.conj() * y).sum();
    Ok(overlap.norm_sqr())
}

/// Which modes a density matrix lives on, in canonical order, with their Fock dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub modes: Vec<ModeLabel>,
    pub dims: Vec<usize>,
}

impl Basis {
    pub fn new(modes: Vec<ModeLabel>, dims: Vec<usize>) -> Self {
        Basis { modes, dims }
    }

    pub fn single(mode: ModeLabel, dim: usize) -> Self {
        Basis::new(vec![mode], vec![dim])
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: Array2<Complex64>,
    basis: Basis,
}

impl DensityMatrix {
    /// Checks shape and Hermiticity. Trace and positivity are not enforced here:
    /// reduced states of truncated amplitudes inherit the state's norm deficit.
    pub fn new(elements: Array2<Complex64>, basis: Basis) -> Result<Self> {
        let (r, c) = elements.dim();
        if r != c || r != basis.total_dim() || basis.modes.len() != basis.dims.len() {
            return Err(Error::BasisMismatch(format!(
                "matrix {r}x{c} does not match basis {:?}",
                basis
            )));
        }
        let dev = hermitian_deviation(&elements);
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix not Hermitian: max |rho - rho^dagger| = {dev:.3e}"
            )));
        }
        Ok(DensityMatrix { elements, basis })
    }

    pub fn elements(&self) -> &Array2<Complex64> {
        &self.elements
    }

    pub fn into_elements(self) -> Array2<Complex64> {
        self.elements
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.elements.diag().iter().map(|c| c.re).sum()
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        // rho is Hermitian, so tr(rho^2) = sum |rho_ab|^2.
        self.elements.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.elements.diag().iter().map(|c| c.re).collect()
    }

    /// Mean photon number of a single-mode density.
    pub fn mean_number(&self) -> Result<f64> {
        if self.basis.modes.len() != 1 {
            return Err(Error::BasisMismatch("mean_number needs a single-mode density".into()));
        }
        Ok(self.diagonal().iter().enumerate().map(|(n, p)| n as f64 * p).sum())
    }
}

/// `max |A - A^dagger|` elementwise.
pub fn hermitian_deviation(a: &Array2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    dev
}

/// `M M^dagger`.
pub(crate) fn gram(m: &Array2<Complex64>) -> Array2<Complex64> {
    let mh = m.t().mapv(|c| c.conj());
    m.dot(&mh)
}

/// Coherent-state amplitudes with the probability they fail to capture.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentAmplitudes {
    pub amplitudes: Array1<Complex64>,
    pub norm_deficit: f64,
}

/// `e^{-|alpha|^2/2} alpha^n / sqrt(n!)` for `n = 0..=cutoff`.
pub fn coherent_amplitudes(alpha: Complex64, cutoff: usize) -> CoherentAmplitudes {
    let mut amps = Array1::zeros(cutoff + 1);
    let mut a = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps[0] = a;
    for n in 0..cutoff {
        a = a * alpha / ((n + 1) as f64).sqrt();
        amps[n + 1] = a;
    }
    let captured: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    CoherentAmplitudes {
        amplitudes: amps,
        norm_deficit: 1.0 - captured,
    }
}

/// `|gamma>_p |alpha_s>_s |alpha_i>_i` in the truncation box.
///
/// Each mode's norm deficit must stay below `leak_tol / 3`; the product is not
/// renormalized.
pub fn product_coherent_state(
    alpha_s: Complex64,
    alpha_i: Complex64,
    gamma: Complex64,
    trunc: TruncationSpec,
) -> Result<ThreeModeState> {
    let budget = trunc.leak_tol / 3.0;
    let mut factors = Vec::with_capacity(3);
    for (mode, amp) in [
        (ModeLabel::Pump, gamma),
        (ModeLabel::Signal, alpha_s),
        (ModeLabel::Idler, alpha_i),
    ] {
        let coh = coherent_amplitudes(amp, trunc.cutoff(mode));
        if coh.norm_deficit > budget {
            return Err(Error::TruncationTooSmall {
                context: format!(
                    "{mode} coherent amplitude |{}| at cutoff {}",
                    amp.norm(),
                    trunc.cutoff(mode)
                ),
                deficit: coh.norm_deficit,
                budget,
            });
        }
        factors.push(coh.amplitudes);
    }
    let (p, s, i) = (&factors[0], &factors[1], &factors[2]);
    let amps = Array3::from_shape_fn(trunc.shape(), |(np, ns, ni)| p[np] * s[ns] * i[ni]);
    Ok(ThreeModeState { amps, trunc })
}

/// Reduced density over the modes in `keep` (any order; output uses canonical order).
pub fn partial_trace(state: &ThreeModeState, keep: &[ModeLabel]) -> Result<DensityMatrix> {
    partial_trace_with_limit(state, keep, DEFAULT_MAX_DENSITY_DIM)
}

pub fn partial_trace_with_limit(state: &ThreeModeState, keep: &[ModeLabel], max_dim: usize) -> Result<DensityMatrix> {
    let mut kept: Vec<ModeLabel> = keep.to_vec();
    kept.sort();
    kept.dedup();
    if kept.is_empty() || kept.len() == 3 {
        return Err(Error::InvalidArgument(
            "partial trace must keep a nonempty proper subset of the modes".into(),
        ));
    }
    let trunc = state.truncation();
    let traced: Vec<ModeLabel> = ModeLabel::ALL.iter().copied().filter(|m| !kept.contains(m)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&m| trunc.dim(m)).collect();
    let kept_dim: usize = kept_dims.iter().product();
    if kept_dim > max_dim {
        return Err(Error::DimensionOverflow {
            dim: kept_dim,
            limit: max_dim,
        });
    }
    let traced_dim: usize = traced.iter().map(|&m| trunc.dim(m)).product();
    let order: Vec<usize> = kept.iter().chain(traced.iter()).map(|m| m.axis()).collect();
    let permuted = state.amplitudes().view().permuted_axes([order[0], order[1], order[2]]);
    let m = Array2::from_shape_vec((kept_dim, traced_dim), permuted.iter().copied().collect())
        .expect("permuted tensor has kept_dim * traced_dim elements");
    let rho = gram(&m);
    Ok(DensityMatrix {
        elements: rho,
        basis: Basis::new(kept, kept_dims),
    })
}

/// Photon-number distribution of one mode.
pub fn number_distribution(state: &ThreeModeState, mode: ModeLabel) -> Vec<f64> {
    let axis = mode.axis();
    let probs = state.amplitudes().mapv(|c| c.norm_sqr());
    let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    // Sum the higher axis first so the lower index stays valid.
    probs.sum_axis(Axis(others[1])).sum_axis(Axis(others[0])).to_vec()
}

pub fn expectation_number(state: &ThreeModeState, mode: ModeLabel) -> f64 {
    number_distribution(state, mode)
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

pub fn expectation_number_sq(state: &ThreeModeState, mode: ModeLabel) -> f64 {
    number_distribution(state, mode)
        .iter()
        .enumerate()
        .map(|(n, p)| (n * n) as f64 * p)
        .sum()
}

pub fn norm(state: &ThreeModeState) -> f64 {
    state.norm()
}

/// Probability on the shells `{n_max - 1, n_max}` of each mode.
pub fn leakage(state: &ThreeModeState) -> PerMode<f64> {
    PerMode::from_fn(|mode| {
        let dist = number_distribution(state, mode);
        dist.iter().rev().take(2).sum()
    })
}
