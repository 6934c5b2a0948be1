//! Long-time analysis: closed-form chain solutions of the stationary amplitude
//! recursions, least-squares fits of their free constants, and window averages
//! of reduced densities.
//!
//! The model has recurrences rather than a fixed point, so "steady state" here
//! means statistics averaged over a late time window. Nothing in this module
//! claims convergence to a true stationary state.
//!
//! In this module `delta_n = n_i - n_s`.

use log::warn;
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Snapshot, Trajectory};
use crate::error::{Error, Result};
use crate::fock::{partial_trace, Basis, DensityMatrix, ModeLabel, PerMode};
use crate::linalg::{hermitian_top_eigenvector, singular_values_real};
use crate::measures::effective_thermal_gap;
use crate::special::ln_gamma_signed;

/// Interval `[start, end]` in scaled time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(Error::InvalidArgument(format!("window [{start}, {end}]")));
        }
        Ok(Window { start, end })
    }

    /// `[0.7 t_end, t_end]`.
    pub fn late(t_end: f64) -> Result<Self> {
        Window::new(0.7 * t_end, t_end)
    }

    /// Same end, twice the length (clamped at zero).
    pub fn doubled(&self) -> Self {
        Window {
            start: (2.0 * self.start - self.end).max(0.0),
            end: self.end,
        }
    }

    pub fn contains(&self, tau: f64) -> bool {
        let slack = 1e-12 * self.end.abs().max(1.0);
        tau >= self.start - slack && tau <= self.end + slack
    }
}

fn gamma_quotient(num: f64, den: f64, context: &str) -> Result<f64> {
    let (ln_a, sa) = ln_gamma_signed(num, context)?;
    let (ln_b, sb) = ln_gamma_signed(den, context)?;
    Ok(sa * sb * (ln_a - ln_b).exp())
}

fn parity(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Dependence of a constant-pump chain solution on `N = n_s + n_i`:
/// `Gamma((N + 2)/4) / Gamma((N + 4)/4)`.
pub fn constant_pump_profile(n_s: usize, n_i: usize) -> f64 {
    let n = (n_s + n_i) as f64;
    gamma_quotient((n + 2.0) / 4.0, (n + 4.0) / 4.0, "constant-pump profile").expect("arguments are positive")
}

/// Constant-pump stationary chain coefficient
/// `Gamma((d+4)/4) Gamma((N+2)/4) / (Gamma((d+2)/4) Gamma((N+4)/4)) [c1 + (-1)^{n_s} c2]`
/// with `d = n_i - n_s`, `N = n_i + n_s`.
pub fn constant_pump_chain_coeffs(n_s: usize, n_i: usize, c1: f64, c2: f64) -> Result<f64> {
    if c1 == 0.0 && c2 == 0.0 {
        return Ok(0.0);
    }
    let d = n_i as f64 - n_s as f64;
    let context = format!("constant-pump chain at (n_s, n_i) = ({n_s}, {n_i})");
    let prefactor = gamma_quotient((d + 4.0) / 4.0, (d + 2.0) / 4.0, &context)?;
    Ok(prefactor * constant_pump_profile(n_s, n_i) * (c1 + parity(n_s) * c2))
}

/// The Gamma-ratio form with both numerator arguments depending on `n_i - n_s`.
/// It does not satisfy the constant-pump recursion and is kept for comparison only.
pub fn constant_pump_chain_coeffs_uncorrected(n_s: usize, n_i: usize, c1: f64, c2: f64) -> Result<f64> {
    if c1 == 0.0 && c2 == 0.0 {
        return Ok(0.0);
    }
    let d = n_i as f64 - n_s as f64;
    let n = (n_i + n_s) as f64;
    let context = format!("uncorrected constant-pump chain at (n_s, n_i) = ({n_s}, {n_i})");
    let g = gamma_quotient((d + 4.0) / 4.0, (n + 4.0) / 4.0, &context)?;
    Ok(g * (c1 + parity(n_s) * c2))
}

/// Largest relative residual of `(N/2 + 1) C(n_s+1, n_i+1) = (N/2) C(n_s-1, n_i-1)`
/// along the `delta_n` chain for interior points with `N <= n_total_max`.
pub fn constant_pump_residual<F>(coeff: F, delta_n: i64, n_total_max: usize) -> Result<f64>
where
    F: Fn(usize, usize) -> Result<f64>,
{
    let d = delta_n.unsigned_abs() as usize;
    let first_s = if delta_n >= 0 { 1 } else { 1 + d };
    let mut worst: f64 = 0.0;
    let mut n_s = first_s;
    loop {
        let n_i = (n_s as i64 + delta_n) as usize;
        if n_s + n_i + 2 > n_total_max {
            break;
        }
        let half = (n_s + n_i) as f64 / 2.0;
        let lhs = (half + 1.0) * coeff(n_s + 1, n_i + 1)?;
        let rhs = half * coeff(n_s - 1, n_i - 1)?;
        let scale = lhs.abs().max(rhs.abs());
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        n_s += 1;
    }
    Ok(worst)
}

/// Large-pump stationary chain coefficient at fixed pump invariant `n_p0` and
/// signal-idler index `n` (the two-term Gamma/power solution). `delta_n` enters
/// only through the regime check.
pub fn large_pump_chain_coeffs(n_p0: usize, delta_n: i64, n: usize, c1: f64, c2: f64) -> Result<f64> {
    if n == 2 * n_p0 + 1 {
        return Err(Error::GammaPole {
            argument: 0.0,
            context: format!("large-pump chain denominator n - 2 n_p0 - 1 vanishes at n = {n}, n_p0 = {n_p0}"),
        });
    }
    if 4 * n > n_p0 || 4 * delta_n.unsigned_abs() as usize > n {
        warn!("large-pump chain evaluated outside n_p0 >> n >> |delta_n|: n_p0 = {n_p0}, n = {n}, delta_n = {delta_n}");
    }
    if c1 == 0.0 && c2 == 0.0 {
        return Ok(0.0);
    }
    let np = n_p0 as f64;
    let nf = n as f64;
    let context = format!("large-pump chain at n_p0 = {n_p0}, n = {n}");
    let (lg_num, s_num) = ln_gamma_signed((nf + 1.0) / 2.0, &context)?;
    let (lg_den, s_den) = ln_gamma_signed((nf + 2.0) / 2.0, &context)?;
    let x_ln = if n_p0 == 0 {
        if n == 0 {
            0.0
        } else {
            return Ok(0.0);
        }
    } else {
        0.5 * nf * (np / (np + 1.0)).ln()
    };
    let magnitude = s_num * s_den * (x_ln + lg_num - lg_den - 0.5 * std::f64::consts::PI.ln()).exp();
    let pole = nf - 2.0 * np - 1.0;
    let a = 2.0 * np + 1.0;
    let sign_n1 = -parity(n);
    Ok(magnitude / pole * (c1 * sign_n1 * a - c2 * a * a))
}

/// Largest relative residual of
/// `2(n_p0+1)(2 n_p0 - n)(n+1) C(n+1) = 2 n_p0 (2(n_p0+1) - n) n C(n-1)` for `1 <= n <= n_max`.
pub fn large_pump_residual(n_p0: usize, delta_n: i64, n_max: usize, c1: f64, c2: f64) -> Result<f64> {
    let np = n_p0 as f64;
    let mut worst: f64 = 0.0;
    for n in 1..=n_max {
        if n + 1 == 2 * n_p0 + 1 || n - 1 == 2 * n_p0 + 1 {
            continue;
        }
        let nf = n as f64;
        let lhs =
            2.0 * (np + 1.0) * (2.0 * np - nf) * (nf + 1.0) * large_pump_chain_coeffs(n_p0, delta_n, n + 1, c1, c2)?;
        let rhs = 2.0 * np * (2.0 * (np + 1.0) - nf) * nf * large_pump_chain_coeffs(n_p0, delta_n, n - 1, c1, c2)?;
        let scale = lhs.abs().max(rhs.abs());
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

/// Matrix `C(n_p0, n)` over the given grids.
pub fn large_pump_matrix(n_p0s: &[usize], ns: &[usize], delta_n: i64, c1: f64, c2: f64) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((n_p0s.len(), ns.len()));
    for (r, &np) in n_p0s.iter().enumerate() {
        for (c, &n) in ns.iter().enumerate() {
            m[[r, c]] = large_pump_chain_coeffs(np, delta_n, n, c1, c2)?;
        }
    }
    Ok(m)
}

/// `sigma_2 / sigma_1` of a real matrix; zero for rank at most one.
pub fn second_singular_ratio(m: &Array2<f64>) -> Result<f64> {
    let sv = singular_values_real(m)?;
    match sv.as_slice() {
        [s1, s2, ..] if *s1 > 0.0 => Ok(s2 / s1),
        _ => Ok(0.0),
    }
}

/// Least-squares constants of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainFit {
    pub delta_n: i64,
    pub c1: f64,
    pub c2: f64,
    /// `||data - model|| / ||data||` after phase alignment, zero for zero data.
    pub relative_residual: f64,
    pub points: usize,
}

/// Fits `C(n_s, n_i) = profile(N) [c1 + (-1)^{n_s} c2]` along the `delta_n` chain of a
/// signal-idler amplitude matrix `amps[[n_s, n_i]]`.
///
/// The data are rotated so the first nonzero element is real and positive, then the
/// real parts are fitted by ordinary least squares. The Gamma prefactor depending on
/// `delta_n` alone is absorbed into the constants.
pub fn fit_chain_amplitudes(amps: &Array2<Complex64>, delta_n: i64) -> Result<ChainFit> {
    let (ds, di) = amps.dim();
    let points: Vec<(usize, usize, Complex64)> = (0..ds)
        .filter_map(|s| {
            let i = s as i64 + delta_n;
            (i >= 0 && (i as usize) < di).then(|| (s, i as usize, amps[[s, i as usize]]))
        })
        .collect();
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "chain delta_n = {delta_n} has {} points; a fit needs at least 3",
            points.len()
        )));
    }
    let Some(first) = points.iter().map(|p| p.2).find(|z| z.norm() > 0.0) else {
        return Ok(ChainFit {
            delta_n,
            c1: 0.0,
            c2: 0.0,
            relative_residual: 0.0,
            points: points.len(),
        });
    };
    let align = first.conj() / first.norm();
    let mut normal = [[0.0; 2]; 2];
    let mut rhs = [0.0; 2];
    let mut data_norm = 0.0;
    let rows: Vec<([f64; 2], Complex64)> = points
        .iter()
        .map(|&(s, i, z)| {
            let f = constant_pump_profile(s, i);
            ([f, parity(s) * f], z * align)
        })
        .collect();
    for (basis, y) in &rows {
        for a in 0..2 {
            rhs[a] += basis[a] * y.re;
            for b in 0..2 {
                normal[a][b] += basis[a] * basis[b];
            }
        }
        data_norm += y.norm_sqr();
    }
    let det = normal[0][0] * normal[1][1] - normal[0][1] * normal[1][0];
    if det.abs() <= 1e-300 {
        return Err(Error::Linalg(format!(
            "singular normal equations on chain delta_n = {delta_n}"
        )));
    }
    let c1 = (rhs[0] * normal[1][1] - rhs[1] * normal[0][1]) / det;
    let c2 = (normal[0][0] * rhs[1] - normal[1][0] * rhs[0]) / det;
    let misfit: f64 = rows
        .iter()
        .map(|(basis, y)| (*y - Complex64::new(c1 * basis[0] + c2 * basis[1], 0.0)).norm_sqr())
        .sum();
    Ok(ChainFit {
        delta_n,
        c1,
        c2,
        relative_residual: (misfit / data_norm).sqrt(),
        points: points.len(),
    })
}

/// Fits chain constants to the dominant eigenvector of a signal-idler density matrix.
pub fn fit_chain_constants(rho_si: &DensityMatrix, delta_n: i64) -> Result<ChainFit> {
    let basis = rho_si.basis();
    if basis.modes != [ModeLabel::Signal, ModeLabel::Idler] {
        return Err(Error::BasisMismatch(format!(
            "chain fits need a signal-idler density, got {:?}",
            basis.modes
        )));
    }
    let (_, v) = hermitian_top_eigenvector(rho_si.elements())?;
    let amps = Array2::from_shape_vec((basis.dims[0], basis.dims[1]), v).expect("eigenvector has the basis dimension");
    fit_chain_amplitudes(&amps, delta_n)
}

/// Reduced densities averaged uniformly over the snapshots inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedDensities {
    pub window: Window,
    pub snapshots_used: usize,
    pub modes: PerMode<DensityMatrix>,
    /// Pump-signal, pump-idler and signal-idler, in that order.
    pub pairs: Vec<DensityMatrix>,
}

impl AveragedDensities {
    pub fn pair(&self, a: ModeLabel, b: ModeLabel) -> Option<&DensityMatrix> {
        let mut want = [a, b];
        want.sort();
        self.pairs.iter().find(|rho| rho.basis().modes == want)
    }
}

const PAIRS: [[ModeLabel; 2]; 3] = [
    [ModeLabel::Pump, ModeLabel::Signal],
    [ModeLabel::Pump, ModeLabel::Idler],
    [ModeLabel::Signal, ModeLabel::Idler],
];

fn average_traced(snaps: &[&Snapshot], keep: &[ModeLabel]) -> Result<DensityMatrix> {
    let mut acc: Option<(Array2<Complex64>, Basis)> = None;
    for snap in snaps {
        let rho = partial_trace(&snap.state, keep)?;
        match acc.as_mut() {
            Some((sum, _)) => *sum += rho.elements(),
            None => acc = Some((rho.elements().clone(), rho.basis().clone())),
        }
    }
    let (mut sum, basis) = acc.expect("caller checks for an empty window");
    let trace: f64 = sum.diag().iter().map(|z| z.re).sum();
    sum.mapv_inplace(|z| z / trace);
    let herm = (&sum + &sum.t().mapv(|z| z.conj())) * Complex64::new(0.5, 0.0);
    DensityMatrix::new(herm, basis)
}

fn snapshots_in<'a>(traj: &'a Trajectory, window: &Window) -> Result<Vec<&'a Snapshot>> {
    let snaps: Vec<&Snapshot> = traj.snapshots.iter().filter(|s| window.contains(s.tau)).collect();
    if snaps.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no snapshots in window [{}, {}]",
            window.start, window.end
        )));
    }
    Ok(snaps)
}

/// Uniform average of single-mode and pair reduced densities over stored snapshots
/// in `window`, normalized to unit trace.
pub fn time_averaged_density(traj: &Trajectory, window: Window) -> Result<AveragedDensities> {
    let snaps = snapshots_in(traj, &window)?;
    let single = |m: ModeLabel| average_traced(&snaps, &[m]);
    let modes = PerMode {
        pump: single(ModeLabel::Pump)?,
        signal: single(ModeLabel::Signal)?,
        idler: single(ModeLabel::Idler)?,
    };
    let pairs = PAIRS
        .iter()
        .map(|keep| average_traced(&snaps, keep))
        .collect::<Result<Vec<_>>>()?;
    Ok(AveragedDensities {
        window,
        snapshots_used: snaps.len(),
        modes,
        pairs,
    })
}

/// `(tau, S_thermal - S)` for one mode at every snapshot.
pub fn thermal_gap_series(traj: &Trajectory, mode: ModeLabel) -> Result<Vec<(f64, f64)>> {
    traj.snapshots
        .iter()
        .map(|snap| {
            let rho = partial_trace(&snap.state, &[mode])?;
            Ok((snap.tau, effective_thermal_gap(&rho)?))
        })
        .collect()
}

/// Mean of the values whose time lies in `window`; `None` when there are none.
pub fn window_mean(series: &[(f64, f64)], window: &Window) -> Option<f64> {
    let inside: Vec<f64> = series
        .iter()
        .filter(|(t, _)| window.contains(*t))
        .map(|(_, v)| *v)
        .collect();
    (!inside.is_empty()).then(|| inside.iter().sum::<f64>() / inside.len() as f64)
}

/// How much the late-window statistics move when the window length doubles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStability {
    pub window: Window,
    pub doubled: Window,
    /// `|mean(doubled) - mean(window)| / |mean(window)|` for each mode's photon number.
    pub mean_change: PerMode<f64>,
    /// Signal-idler `delta_n = 0` fit residual for each window, when snapshots allow a fit.
    pub fit_residuals: Option<(f64, f64)>,
}

impl WindowStability {
    pub fn max_mean_change(&self) -> f64 {
        self.mean_change.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }
}

pub fn window_stability(traj: &Trajectory, window: Window) -> Result<WindowStability> {
    let doubled = window.doubled();
    let mode_mean = |w: &Window, mode: ModeLabel| {
        let series: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.tau, s.mean[mode])).collect();
        window_mean(&series, w)
            .ok_or_else(|| Error::InvalidArgument(format!("no samples in window [{}, {}]", w.start, w.end)))
    };
    let mut mean_change = PerMode::default();
    for mode in ModeLabel::ALL {
        let a = mode_mean(&window, mode)?;
        let b = mode_mean(&doubled, mode)?;
        mean_change[mode] = if a == 0.0 { (b - a).abs() } else { ((b - a) / a).abs() };
    }
    let fit = |w: Window| -> Result<f64> {
        let avg = time_averaged_density(traj, w)?;
        let rho = avg
            .pair(ModeLabel::Signal, ModeLabel::Idler)
            .expect("pair densities always include signal-idler");
        Ok(fit_chain_constants(rho, 0)?.relative_residual)
    };
    let fit_residuals = match (fit(window), fit(doubled)) {
        (Ok(a), Ok(b)) => Some((a, b)),
        _ => None,
    };
    Ok(WindowStability {
        window,
        doubled,
        mean_change,
        fit_residuals,
    })
}
