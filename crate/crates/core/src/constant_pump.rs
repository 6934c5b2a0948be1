//! Two-mode squeezed states with a classical, undepleted pump.
//!
//! The squeeze operator is `S = exp(r (a b e^{-2i phi} - a^dag b^dag e^{2i phi}))`
//! with `mu = cosh r` and `nu = e^{2i phi} sinh r`. The seeded state is
//! `S D_s(alpha_s) D_i(alpha_i) |0,0>`; the reversed ordering is
//! `D_s(beta_s) D_i(beta_i) S |0,0>`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{coherent_amplitudes, TwoModeState};
use crate::linalg::expm_apply;
use crate::special::{ln_factorial, scaled_laguerre_sequence};

/// Below this squeeze parameter the closed form is replaced by its `r = 0` limit.
pub const SMALL_R: f64 = 1e-8;

/// Largest TMSVS probability allowed beyond the cutoff.
pub const TMSVS_TAIL_TOL: f64 = 1e-12;

/// Reduces an angle to `(-pi, pi]`.
pub fn reduce_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    r: f64,
    phi: f64,
}

impl SqueezeParams {
    /// `phi` is half the pump phase.
    pub fn new(r: f64, phi: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) || !phi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "squeeze parameters r = {r}, phi = {phi}"
            )));
        }
        Ok(SqueezeParams {
            r,
            phi: reduce_phase(phi),
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn mu(&self) -> f64 {
        self.r.cosh()
    }

    pub fn nu(&self) -> Complex64 {
        Complex64::from_polar(self.r.sinh(), 2.0 * self.phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentSeed {
    mag: f64,
    theta: f64,
}

impl CoherentSeed {
    pub fn new(mag: f64, theta: f64) -> Result<Self> {
        if !(mag >= 0.0 && mag.is_finite()) || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "coherent seed |alpha| = {mag}, theta = {theta}"
            )));
        }
        Ok(CoherentSeed {
            mag,
            theta: reduce_phase(theta),
        })
    }

    pub fn vacuum() -> Self {
        CoherentSeed { mag: 0.0, theta: 0.0 }
    }

    pub fn from_complex(alpha: Complex64) -> Self {
        CoherentSeed {
            mag: alpha.norm(),
            theta: if alpha.norm() == 0.0 { 0.0 } else { alpha.arg() },
        }
    }

    pub fn mag(&self) -> f64 {
        self.mag
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.mag, self.theta)
    }
}

/// `theta_s + theta_i - 2 phi`, reduced to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CumulativePhase(f64);

impl CumulativePhase {
    pub fn new(value: f64) -> Self {
        CumulativePhase(reduce_phase(value))
    }

    pub fn from_phases(theta_s: f64, theta_i: f64, two_phi: f64) -> Self {
        Self::new(theta_s + theta_i - two_phi)
    }

    pub fn of(seed_s: &CoherentSeed, seed_i: &CoherentSeed, sq: &SqueezeParams) -> Self {
        Self::from_phases(seed_s.theta, seed_i.theta, 2.0 * sq.phi)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Angular-momentum labels `(j, m)` stored doubled, with `(n_1, n_2) = (j + m, j - m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JMIndex {
    two_j: u32,
    two_m: i32,
}

impl JMIndex {
    pub fn new(two_j: u32, two_m: i32) -> Result<Self> {
        if two_m.unsigned_abs() > two_j || (two_j as i64 + two_m as i64) % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "(j, m) = ({}/2, {}/2) does not label a Fock pair",
                two_j, two_m
            )));
        }
        Ok(JMIndex { two_j, two_m })
    }

    pub fn from_numbers(n1: u32, n2: u32) -> Self {
        JMIndex {
            two_j: n1 + n2,
            two_m: n1 as i32 - n2 as i32,
        }
    }

    pub fn numbers(self) -> (u32, u32) {
        let n1 = (self.two_j as i32 + self.two_m) / 2;
        let n2 = (self.two_j as i32 - self.two_m) / 2;
        (n1 as u32, n2 as u32)
    }

    pub fn j(self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn m(self) -> f64 {
        self.two_m as f64 / 2.0
    }
}

/// Two-mode squeezed vacuum on `|n, n>`, `n = 0..=cutoff`.
pub fn tmsvs_amplitudes(sq: &SqueezeParams, cutoff: usize) -> Result<TwoModeState> {
    let t = sq.r.tanh();
    let tail = t.powi(2 * (cutoff as i32 + 1));
    if tail > TMSVS_TAIL_TOL {
        return Err(Error::TruncationTooSmall {
            context: format!("squeezed vacuum with r = {} at cutoff {cutoff}", sq.r),
            deficit: tail,
            budget: TMSVS_TAIL_TOL,
        });
    }
    let mut amps = Array2::zeros((cutoff + 1, cutoff + 1));
    let step = -Complex64::from_polar(t, 2.0 * sq.phi);
    let mut a = Complex64::new(1.0 / sq.r.cosh(), 0.0);
    for n in 0..=cutoff {
        amps[[n, n]] = a;
        a *= step;
    }
    TwoModeState::from_amplitudes(amps)
}

fn coherent_product(alpha_s: Complex64, alpha_i: Complex64, cutoff: usize) -> Result<TwoModeState> {
    let a = coherent_amplitudes(alpha_s, cutoff).amplitudes;
    let b = coherent_amplitudes(alpha_i, cutoff).amplitudes;
    TwoModeState::from_amplitudes(Array2::from_shape_fn((cutoff + 1, cutoff + 1), |(i, j)| a[i] * b[j]))
}

/// Squeezed coherent state from the Laguerre closed form.
///
/// With `n< = min(n1, n2)`, `n> = max(n1, n2)`, `d = n> - n<` and `alpha>` the seed
/// of the more populated mode,
/// `c = (-1)^{n<} sqrt(n<!/n>!) alpha>^d mu^{-1-n>} nu^{n<} L_{n<}^d(w/nu)
///      exp(-(|alpha_s|^2 + |alpha_i|^2)/2 + nu^* alpha_s alpha_i / mu)`
/// where `w = alpha_s alpha_i / mu`. The `nu^n L_n` product is evaluated by
/// [`scaled_laguerre_sequence`] and the magnitude prefactor in log space.
pub fn tmscs_closed_form(
    seed_s: &CoherentSeed,
    seed_i: &CoherentSeed,
    sq: &SqueezeParams,
    cutoff: usize,
) -> Result<TwoModeState> {
    if cutoff < 1 {
        return Err(Error::InvalidTruncation("cutoff must be >= 1".into()));
    }
    let alpha_s = seed_s.amplitude();
    let alpha_i = seed_i.amplitude();
    if sq.r < SMALL_R {
        return coherent_product(alpha_s, alpha_i, cutoff);
    }
    let mu = sq.mu();
    let nu = sq.nu();
    let w = alpha_s * alpha_i / mu;
    let ln_mu = mu.ln();
    let gauss = Complex64::new(-0.5 * (seed_s.mag.powi(2) + seed_i.mag.powi(2)), 0.0) + nu.conj() * w;
    let mut amps = Array2::zeros((cutoff + 1, cutoff + 1));
    for d in 0..=cutoff {
        let p = scaled_laguerre_sequence(cutoff - d, d, nu, w);
        for (lo, p_lo) in p.iter().enumerate() {
            let hi = lo + d;
            let write = |amps: &mut Array2<Complex64>, seed: &CoherentSeed, transpose: bool| {
                if d > 0 && seed.mag == 0.0 {
                    return;
                }
                let ln_seed = if d == 0 { 0.0 } else { d as f64 * seed.mag.ln() };
                let ln_mag = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) + ln_seed - (1 + hi) as f64 * ln_mu;
                let phase = d as f64 * seed.theta;
                let sign = if lo % 2 == 0 { 1.0 } else { -1.0 };
                let prefactor = (gauss + Complex64::new(ln_mag, phase)).exp() * sign;
                let idx = if transpose { [lo, hi] } else { [hi, lo] };
                amps[idx] = prefactor * p_lo;
            };
            write(&mut amps, seed_s, false);
            if d > 0 {
                write(&mut amps, seed_i, true);
            }
        }
    }
    let state = TwoModeState::from_amplitudes(amps)?;
    let deficit = state.norm_deficit();
    if deficit > 1e-6 {
        log::warn!("closed-form squeezed coherent state at cutoff {cutoff} misses probability {deficit:.3e}");
    }
    Ok(state)
}

/// Flat index of `(n1, n2)` in a `(cutoff + 1)^2` vector.
fn flat(n1: usize, n2: usize, dim: usize) -> usize {
    n1 * dim + n2
}

fn apply_displacement(v: &mut [Complex64], alpha: Complex64, mode: usize, cutoff: usize) -> Result<()> {
    if alpha.norm() == 0.0 {
        return Ok(());
    }
    let dim = cutoff + 1;
    let sqrt: Vec<f64> = (0..=dim).map(|n| (n as f64).sqrt()).collect();
    // G = alpha a^dag - alpha^* a on the chosen mode.
    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        for n1 in 0..dim {
            for n2 in 0..dim {
                let n = if mode == 0 { n1 } else { n2 };
                let mut acc = Complex64::new(0.0, 0.0);
                if n > 0 {
                    let src = if mode == 0 {
                        flat(n1 - 1, n2, dim)
                    } else {
                        flat(n1, n2 - 1, dim)
                    };
                    acc += alpha * sqrt[n] * x[src];
                }
                if n < cutoff {
                    let src = if mode == 0 {
                        flat(n1 + 1, n2, dim)
                    } else {
                        flat(n1, n2 + 1, dim)
                    };
                    acc -= alpha.conj() * sqrt[n + 1] * x[src];
                }
                out[flat(n1, n2, dim)] = acc;
            }
        }
    };
    expm_apply(apply, v, 2.0 * alpha.norm() * (cutoff as f64).sqrt())
}

fn apply_squeeze(v: &mut [Complex64], sq: &SqueezeParams, cutoff: usize) -> Result<()> {
    if sq.r == 0.0 {
        return Ok(());
    }
    let dim = cutoff + 1;
    let lower = Complex64::from_polar(sq.r, -2.0 * sq.phi);
    let raise = Complex64::from_polar(sq.r, 2.0 * sq.phi);
    // G = r e^{-2i phi} a b - r e^{2i phi} a^dag b^dag.
    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        for n1 in 0..dim {
            for n2 in 0..dim {
                let mut acc = Complex64::new(0.0, 0.0);
                if n1 < cutoff && n2 < cutoff {
                    let g = (((n1 + 1) * (n2 + 1)) as f64).sqrt();
                    acc += lower * g * x[flat(n1 + 1, n2 + 1, dim)];
                }
                if n1 > 0 && n2 > 0 {
                    let g = ((n1 * n2) as f64).sqrt();
                    acc -= raise * g * x[flat(n1 - 1, n2 - 1, dim)];
                }
                out[flat(n1, n2, dim)] = acc;
            }
        }
    };
    expm_apply(apply, v, 2.0 * sq.r * cutoff as f64)
}

fn vector_to_state(v: Vec<Complex64>, cutoff: usize) -> Result<TwoModeState> {
    let amps = Array2::from_shape_vec((cutoff + 1, cutoff + 1), v).expect("square basis");
    TwoModeState::from_amplitudes(amps)
}

fn double_vacuum(cutoff: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); (cutoff + 1) * (cutoff + 1)];
    v[0] = Complex64::new(1.0, 0.0);
    v
}

/// `S D_s(alpha_s) D_i(alpha_i) |0,0>` by exponentiating the truncated generators.
pub fn tmscs_operator_path(
    seed_s: &CoherentSeed,
    seed_i: &CoherentSeed,
    sq: &SqueezeParams,
    cutoff: usize,
) -> Result<TwoModeState> {
    if cutoff < 1 {
        return Err(Error::InvalidTruncation("cutoff must be >= 1".into()));
    }
    let mut v = double_vacuum(cutoff);
    apply_displacement(&mut v, seed_s.amplitude(), 0, cutoff)?;
    apply_displacement(&mut v, seed_i.amplitude(), 1, cutoff)?;
    apply_squeeze(&mut v, sq, cutoff)?;
    vector_to_state(v, cutoff)
}

/// `D_s(beta_s) D_i(beta_i) S |0,0>` by exponentiating the truncated generators.
pub fn reversed_operator_path(
    beta_s: Complex64,
    beta_i: Complex64,
    sq: &SqueezeParams,
    cutoff: usize,
) -> Result<TwoModeState> {
    if cutoff < 1 {
        return Err(Error::InvalidTruncation("cutoff must be >= 1".into()));
    }
    let mut v = double_vacuum(cutoff);
    apply_squeeze(&mut v, sq, cutoff)?;
    apply_displacement(&mut v, beta_s, 0, cutoff)?;
    apply_displacement(&mut v, beta_i, 1, cutoff)?;
    vector_to_state(v, cutoff)
}

/// Displacements `(beta_s, beta_i)` that reproduce the seeded state when applied after `S`.
pub fn ordering_transform(seed_s: &CoherentSeed, seed_i: &CoherentSeed, sq: &SqueezeParams) -> (Complex64, Complex64) {
    let (a_s, a_i) = (seed_s.amplitude(), seed_i.amplitude());
    let (mu, nu) = (sq.mu(), sq.nu());
    (mu * a_s - nu * a_i.conj(), mu * a_i - nu * a_s.conj())
}

/// Inverse of [`ordering_transform`].
pub fn inverse_ordering_transform(beta_s: Complex64, beta_i: Complex64, sq: &SqueezeParams) -> (Complex64, Complex64) {
    let (mu, nu) = (sq.mu(), sq.nu());
    (mu * beta_s + nu * beta_i.conj(), mu * beta_i + nu * beta_s.conj())
}

/// Total mean photon number of the seeded state.
pub fn mean_total_photons_tmscs(seed_s: &CoherentSeed, seed_i: &CoherentSeed, sq: &SqueezeParams) -> f64 {
    let phi = CumulativePhase::of(seed_s, seed_i, sq).value();
    let r2 = 2.0 * sq.r;
    (seed_s.mag.powi(2) + seed_i.mag.powi(2)) * r2.cosh() - 2.0 * seed_s.mag * seed_i.mag * phi.cos() * r2.sinh()
        + 2.0 * sq.r.sinh().powi(2)
}

/// Total mean photon number of `D(beta) S |0,0>`.
pub fn mean_total_photons_reversed(beta_s: Complex64, beta_i: Complex64, sq: &SqueezeParams) -> f64 {
    beta_s.norm_sqr() + beta_i.norm_sqr() + 2.0 * sq.r.sinh().powi(2)
}

/// Per-mode mean photon numbers `(n_s, n_i)` of the seeded state.
pub fn mean_photons_per_mode(seed_s: &CoherentSeed, seed_i: &CoherentSeed, sq: &SqueezeParams) -> (f64, f64) {
    let (b_s, b_i) = ordering_transform(seed_s, seed_i, sq);
    let s = sq.r.sinh().powi(2);
    (b_s.norm_sqr() + s, b_i.norm_sqr() + s)
}

/// Mandel Q of either mode for equal seed magnitudes.
pub fn mandel_q_tmscs(alpha_mag: f64, r: f64, phi: f64) -> Result<f64> {
    let s = r.sinh().powi(2);
    let denom = alpha_mag.powi(2) * ((2.0 * r).cosh() - (2.0 * r).sinh() * phi.cos()) + s;
    if denom <= 0.0 {
        return Err(Error::Undefined(format!(
            "Mandel Q at |alpha| = {alpha_mag}, r = {r}: zero mean photon number"
        )));
    }
    Ok(2.0 * s - s * s / denom)
}

/// Log-negativity (base 2) of the squeezed vacuum, `log2 e^{2r}`.
pub fn logneg_tmsvs(r: f64) -> f64 {
    2.0 * r / std::f64::consts::LN_2
}

/// `cosh^2 r ln cosh^2 r - sinh^2 r ln sinh^2 r`, the entropy of either traced mode.
pub fn tmsvs_mode_entropy(r: f64) -> f64 {
    let c = r.cosh().powi(2);
    let s = r.sinh().powi(2);
    if s == 0.0 {
        0.0
    } else {
        c * c.ln() - s * s.ln()
    }
}
