//! Entropies, negativities and photon statistics.
//!
//! Entropies use the natural log. Log-negativities use log base 2.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{partial_trace, Basis, DensityMatrix, ModeLabel, ThreeModeState, TwoModeState};
use crate::linalg::{hermitian_eigen_with_residual, hermitian_eigenvalues, max_abs, singular_values};

/// Eigenvalues at or below this are dropped from entropy sums.
pub const ENTROPY_EPS: f64 = 1e-12;
/// Eigenvalues below this mark a matrix as not a state, and count toward negativity.
pub const NEGATIVE_EIG_TOL: f64 = -1e-10;
/// Allowed disagreement between the two sides of a pure bipartition.
pub const ENTROPY_MATCH_TOL: f64 = 1e-7;
/// Allowed departure from unit total probability in [`mandel_q`].
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-6;

/// Eigenvalues in descending order with the eigenpair residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub residual: f64,
}

impl Spectrum {
    pub fn of(a: &Array2<Complex64>) -> Result<Self> {
        let (mut values, residual) = hermitian_eigen_with_residual(a)?;
        values.reverse();
        let scale = max_abs(a).max(f64::MIN_POSITIVE) * a.nrows() as f64;
        if residual >= 1e-8 * scale {
            return Err(Error::Linalg(format!(
                "eigenpair residual {residual:.3e} exceeds 1e-8 of matrix scale {scale:.3e}"
            )));
        }
        Ok(Spectrum { values, residual })
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// `-sum lambda ln lambda`, rejecting spectra with eigenvalues below `-1e-10`.
pub fn entropy_from_eigenvalues(values: &[f64]) -> Result<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < NEGATIVE_EIG_TOL {
        return Err(Error::NotAState { min_eigenvalue: min });
    }
    Ok(values.iter().filter(|&&l| l > ENTROPY_EPS).map(|&l| -l * l.ln()).sum())
}

/// Von Neumann entropy in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_from_eigenvalues(&hermitian_eigenvalues(rho.elements())?)
}

/// Entropy of a pure bipartition from the singular values of its amplitude matrix.
pub fn schmidt_entropy(amplitudes: &Array2<Complex64>) -> Result<f64> {
    let probs: Vec<f64> = singular_values(amplitudes)?.iter().map(|s| s * s).collect();
    entropy_from_eigenvalues(&probs)
}

/// Partial transpose on the chosen mode of a two-mode density matrix.
pub fn partial_transpose(rho: &DensityMatrix, which: ModeLabel) -> Result<Array2<Complex64>> {
    let basis = rho.basis();
    if basis.modes.len() != 2 {
        return Err(Error::BasisMismatch(
            "partial transpose needs a two-mode density matrix".into(),
        ));
    }
    let pos = basis
        .modes
        .iter()
        .position(|&m| m == which)
        .ok_or_else(|| Error::BasisMismatch(format!("{which} is not part of this density matrix")))?;
    let (d1, d2) = (basis.dims[0], basis.dims[1]);
    let e = rho.elements();
    let n = d1 * d2;
    let mut out = Array2::zeros((n, n));
    for a1 in 0..d1 {
        for a2 in 0..d2 {
            for b1 in 0..d1 {
                for b2 in 0..d2 {
                    let (r1, r2, c1, c2) = if pos == 1 { (a1, b2, b1, a2) } else { (b1, a2, a1, b2) };
                    out[[a1 * d2 + a2, b1 * d2 + b2]] = e[[r1 * d2 + r2, c1 * d2 + c2]];
                }
            }
        }
    }
    Ok(out)
}

/// Sum of `|lambda|` over eigenvalues of the partial transpose below `-1e-10`.
pub fn negativity(rho: &DensityMatrix) -> Result<f64> {
    let second = rho
        .basis()
        .modes
        .get(1)
        .copied()
        .ok_or_else(|| Error::BasisMismatch("negativity needs a two-mode density matrix".into()))?;
    let pt = partial_transpose(rho, second)?;
    Ok(hermitian_eigenvalues(&pt)?
        .iter()
        .filter(|&&l| l < NEGATIVE_EIG_TOL)
        .map(|l| -l)
        .sum())
}

/// `log2(1 + 2N)`.
pub fn log_negativity(rho: &DensityMatrix) -> Result<f64> {
    Ok((1.0 + 2.0 * negativity(rho)?).log2())
}

/// Log-negativity of a pure two-mode state, `2 log2 sum_k s_k` over Schmidt coefficients.
pub fn log_negativity_pure(state: &TwoModeState) -> Result<f64> {
    let total: f64 = singular_values(state.amplitudes())?.iter().sum();
    Ok(2.0 * total.log2())
}

/// `(<n^2> - <n>^2 - <n>) / <n>` of a photon-number distribution.
pub fn mandel_q(distribution: &[f64]) -> Result<f64> {
    if let Some(p) = distribution.iter().find(|&&p| p < -1e-12) {
        return Err(Error::InvalidArgument(format!("negative probability {p}")));
    }
    let total: f64 = distribution.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_SUM_TOL {
        return Err(Error::InvalidArgument(format!("distribution sums to {total}")));
    }
    let (mean, second) = distribution.iter().enumerate().fold((0.0, 0.0), |(m, s), (n, p)| {
        let n = n as f64;
        (m + n * p, s + n * n * p)
    });
    if mean <= 0.0 {
        return Err(Error::Undefined("Mandel Q of a distribution with zero mean".into()));
    }
    Ok((second - mean * mean - mean) / mean)
}

/// Entropy of one mode of a pure three-mode state.
pub fn mode_entropy(state: &ThreeModeState, mode: ModeLabel) -> Result<f64> {
    von_neumann_entropy(&partial_trace(state, &[mode])?)
}

/// Entropy of the complement of `mode`, from the singular values of the
/// `mode x rest` amplitude matrix.
pub fn complement_entropy(state: &ThreeModeState, mode: ModeLabel) -> Result<f64> {
    let amps = state.amplitudes();
    let axis = mode.axis();
    let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    let permuted = amps.view().permuted_axes([axis, others[0], others[1]]);
    let (d0, d1, d2) = permuted.dim();
    let m =
        Array2::from_shape_vec((d0, d1 * d2), permuted.iter().copied().collect()).expect("reshape keeps element count");
    schmidt_entropy(&m)
}

/// `I(p : s,i) = S_p + S_{s,i} = 2 S_p` for a pure state.
///
/// `S_{s,i}` is computed independently from the Schmidt decomposition and must
/// agree with `S_p` within `1e-7`.
pub fn mutual_information_pump_vs_si(state: &ThreeModeState) -> Result<f64> {
    let s_p = mode_entropy(state, ModeLabel::Pump)?;
    let s_si = complement_entropy(state, ModeLabel::Pump)?;
    if (s_p - s_si).abs() > ENTROPY_MATCH_TOL {
        return Err(Error::EntropyMismatch { left: s_p, right: s_si });
    }
    Ok(2.0 * s_p)
}

/// `I(s : i) = S_s + S_i - S_{s,i}` with `S_{s,i} = S_p` for a pure state.
pub fn mutual_information_s_vs_i(state: &ThreeModeState) -> Result<f64> {
    let s_s = mode_entropy(state, ModeLabel::Signal)?;
    let s_i = mode_entropy(state, ModeLabel::Idler)?;
    let s_p = mode_entropy(state, ModeLabel::Pump)?;
    Ok(s_s + s_i - s_p)
}

/// Entropy of a thermal state with mean `n_mean`.
pub fn thermal_entropy(n_mean: f64) -> Result<f64> {
    if n_mean < 0.0 || !n_mean.is_finite() {
        return Err(Error::InvalidArgument(format!("thermal mean photon number {n_mean}")));
    }
    if n_mean == 0.0 {
        return Ok(0.0);
    }
    Ok((n_mean + 1.0) * (n_mean + 1.0).ln() - n_mean * n_mean.ln())
}

/// Normalized thermal state `p_n = n^n / (n + 1)^{n+1}` truncated at `cutoff`.
pub fn effective_thermal_state(n_mean: f64, mode: ModeLabel, cutoff: usize) -> Result<DensityMatrix> {
    if n_mean < 0.0 || !n_mean.is_finite() {
        return Err(Error::InvalidArgument(format!("thermal mean photon number {n_mean}")));
    }
    let ratio = n_mean / (n_mean + 1.0);
    let mut rho = Array2::zeros((cutoff + 1, cutoff + 1));
    let mut p = 1.0 / (n_mean + 1.0);
    for n in 0..=cutoff {
        rho[[n, n]] = Complex64::new(p, 0.0);
        p *= ratio;
    }
    DensityMatrix::new(rho, Basis::single(mode, cutoff + 1))
}

/// `S_thermal(<n>) - S(rho)` for a single-mode density.
pub fn effective_thermal_gap(rho: &DensityMatrix) -> Result<f64> {
    let mean = rho.mean_number()?;
    Ok(thermal_entropy(mean.max(0.0))? - von_neumann_entropy(rho)?)
}
