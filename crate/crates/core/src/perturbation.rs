//! Short-time expansions in `tau` for the quantized-pump model, starting from a
//! product of coherent states. Coefficients are closed-form functions of the
//! seed magnitudes and the cumulative phase, so sum rules cancel exactly.

use std::fmt;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constant_pump::{CoherentSeed, CumulativePhase};
use crate::error::{Error, Result};
use crate::fock::{coherent_amplitudes, hermitian_deviation, Basis, DensityMatrix, ModeLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    Number(ModeLabel),
    SecondMoment(ModeLabel),
    Variance(ModeLabel),
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Number(m) => write!(f, "<n_{m}>"),
            Observable::SecondMoment(m) => write!(f, "<n_{m}^2>"),
            Observable::Variance(m) => write!(f, "var(n_{m})"),
        }
    }
}

/// `c0 + c1 tau + c2 tau^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeSeries {
    pub observable: Observable,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Rough upper end of the range where the truncated series is trustworthy.
    pub tau_max: f64,
}

impl PerturbativeSeries {
    pub fn evaluate(&self, tau: f64) -> f64 {
        self.c0 + tau * (self.c1 + tau * self.c2)
    }

    /// Value keeping only the terms up to `order`.
    pub fn evaluate_to_order(&self, tau: f64, order: usize) -> f64 {
        match order {
            0 => self.c0,
            1 => self.c0 + self.c1 * tau,
            _ => self.evaluate(tau),
        }
    }
}

pub fn evaluate_series(series: &PerturbativeSeries, tau: f64) -> f64 {
    series.evaluate(tau)
}

/// Initial coherent amplitudes of the signal, idler and pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedTriple {
    pub seed_s: CoherentSeed,
    pub seed_i: CoherentSeed,
    pub pump_mag: f64,
    /// Pump phase `2 phi`.
    pub pump_phase: f64,
}

impl SeedTriple {
    pub fn new(seed_s: CoherentSeed, seed_i: CoherentSeed, pump_mag: f64, pump_phase: f64) -> Result<Self> {
        if !(pump_mag >= 0.0 && pump_mag.is_finite()) || !pump_phase.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pump amplitude |gamma| = {pump_mag}, phase {pump_phase}"
            )));
        }
        Ok(SeedTriple {
            seed_s,
            seed_i,
            pump_mag,
            pump_phase,
        })
    }

    /// Real seed phases with the pump phase chosen to give cumulative phase `phi`.
    pub fn from_intensities(alpha_s2: f64, alpha_i2: f64, gamma2: f64, phi: f64) -> Result<Self> {
        if alpha_s2 < 0.0 || alpha_i2 < 0.0 || gamma2 < 0.0 {
            return Err(Error::InvalidArgument("intensities must be nonnegative".into()));
        }
        Self::new(
            CoherentSeed::new(alpha_s2.sqrt(), 0.0)?,
            CoherentSeed::new(alpha_i2.sqrt(), 0.0)?,
            gamma2.sqrt(),
            -phi,
        )
    }

    pub fn phi(&self) -> CumulativePhase {
        CumulativePhase::from_phases(self.seed_s.theta(), self.seed_i.theta(), self.pump_phase)
    }

    pub fn alpha_s(&self) -> Complex64 {
        self.seed_s.amplitude()
    }

    pub fn alpha_i(&self) -> Complex64 {
        self.seed_i.amplitude()
    }

    pub fn gamma(&self) -> Complex64 {
        Complex64::from_polar(self.pump_mag, self.pump_phase)
    }

    fn intensities(&self) -> (f64, f64, f64) {
        (
            self.seed_s.mag().powi(2),
            self.seed_i.mag().powi(2),
            self.pump_mag.powi(2),
        )
    }

    fn tau_max(&self) -> f64 {
        let (a, b, g) = self.intensities();
        0.25 / (1.0 + a + b + g).sqrt()
    }
}

fn series(observable: Observable, c: [f64; 3], seeds: &SeedTriple) -> PerturbativeSeries {
    PerturbativeSeries {
        observable,
        c0: c[0],
        c1: c[1],
        c2: c[2],
        tau_max: seeds.tau_max(),
    }
}

fn pump_coefficients(seeds: &SeedTriple) -> [f64; 3] {
    let (a, b, g) = seeds.intensities();
    let phi = seeds.phi().value();
    [g, 2.0 * (a * b * g).sqrt() * phi.cos(), a * b - g * (1.0 + a + b)]
}

fn number_coefficients(seeds: &SeedTriple, mode: ModeLabel) -> [f64; 3] {
    let p = pump_coefficients(seeds);
    let (a, b, _) = seeds.intensities();
    match mode {
        ModeLabel::Pump => p,
        ModeLabel::Signal => [a, -p[1], -p[2]],
        ModeLabel::Idler => [b, -p[1], -p[2]],
    }
}

pub fn pump_number_series(seeds: &SeedTriple) -> PerturbativeSeries {
    number_series(seeds, ModeLabel::Pump)
}

pub fn signal_number_series(seeds: &SeedTriple) -> PerturbativeSeries {
    number_series(seeds, ModeLabel::Signal)
}

pub fn idler_number_series(seeds: &SeedTriple) -> PerturbativeSeries {
    number_series(seeds, ModeLabel::Idler)
}

pub fn number_series(seeds: &SeedTriple, mode: ModeLabel) -> PerturbativeSeries {
    series(Observable::Number(mode), number_coefficients(seeds, mode), seeds)
}

pub fn second_moment_series(seeds: &SeedTriple, mode: ModeLabel) -> PerturbativeSeries {
    let [n0, n1, n2] = number_coefficients(seeds, mode);
    let (a, b, g) = seeds.intensities();
    let cos2 = (2.0 * seeds.phi().value()).cos();
    let extra = match mode {
        ModeLabel::Pump => 2.0 * g * (a * b * (2.0 + g) - g * (1.0 + a + b + a * b) + a * b * cos2),
        ModeLabel::Signal => 2.0 * a * (g * (1.0 + b) * (2.0 + a) - a * b * (1.0 + g) + g * b * cos2),
        ModeLabel::Idler => 2.0 * b * (g * (1.0 + a) * (2.0 + b) - a * b * (1.0 + g) + g * a * cos2),
    };
    series(
        Observable::SecondMoment(mode),
        [n0 * n0 + n0, n1 * (1.0 + 2.0 * n0), n2 + extra],
        seeds,
    )
}

pub fn variance_series(seeds: &SeedTriple, mode: ModeLabel) -> PerturbativeSeries {
    let [n0, n1, n2] = number_coefficients(seeds, mode);
    let (a, b, g) = seeds.intensities();
    let extra = match mode {
        ModeLabel::Pump => 0.0,
        ModeLabel::Signal => 2.0 * a * g,
        ModeLabel::Idler => 2.0 * b * g,
    };
    series(Observable::Variance(mode), [n0, n1, n2 + extra], seeds)
}

fn mandel_q_to_order(seeds: &SeedTriple, mode: ModeLabel, tau: f64, order: usize) -> Result<f64> {
    let mean = number_series(seeds, mode).evaluate_to_order(tau, order);
    if mean <= 0.0 {
        return Err(Error::Undefined(format!(
            "second-order mean photon number of the {mode} mode is {mean} at tau = {tau}"
        )));
    }
    let var = variance_series(seeds, mode).evaluate_to_order(tau, order);
    Ok((var - mean) / mean)
}

/// Mandel Q through `tau^2`: zero for the pump and `2 |alpha_j|^2 |gamma|^2 tau^2 / n_j(tau)`
/// for the signal (`j = s`) and idler (`j = i`).
pub fn mandel_q_second_order(seeds: &SeedTriple, mode: ModeLabel, tau: f64) -> Result<f64> {
    if tau > seeds.tau_max() {
        log::warn!("tau = {tau} is beyond the series validity hint {:.3e}", seeds.tau_max());
    }
    mandel_q_to_order(seeds, mode, tau, 2)
}

/// Mandel Q keeping only first-order terms, which vanishes for every mode.
pub fn mandel_q_first_order(seeds: &SeedTriple, mode: ModeLabel, tau: f64) -> Result<f64> {
    mandel_q_to_order(seeds, mode, tau, 1)
}

/// Signal-idler density matrix to first order in `tau`, on a truncated basis.
///
/// With `sigma` the coherent-product vector and `u = a^dag b^dag sigma`,
/// `rho = sigma sigma^dag + tau [2 Re(alpha_s alpha_i gamma^*) sigma sigma^dag
///        - gamma u sigma^dag - gamma^* sigma u^dag]`.
/// The result is Hermitized and rescaled to unit trace; both corrections are logged.
pub fn first_order_reduced_density(seeds: &SeedTriple, tau: f64, cutoffs: (usize, usize)) -> Result<DensityMatrix> {
    let (ns, ni) = cutoffs;
    if ns < 1 || ni < 1 {
        return Err(Error::InvalidTruncation(format!("cutoffs ({ns}, {ni}) must be >= 1")));
    }
    if tau > seeds.tau_max() {
        log::warn!(
            "first-order density at tau = {tau} beyond validity hint {:.3e}",
            seeds.tau_max()
        );
    }
    let a = coherent_amplitudes(seeds.alpha_s(), ns).amplitudes;
    let b = coherent_amplitudes(seeds.alpha_i(), ni).amplitudes;
    let (ds, di) = (ns + 1, ni + 1);
    let sigma: Vec<Complex64> = (0..ds * di).map(|k| a[k / di] * b[k % di]).collect();
    let u: Vec<Complex64> = (0..ds * di)
        .map(|k| {
            let (s, i) = (k / di, k % di);
            if s == 0 || i == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                a[s - 1] * b[i - 1] * ((s * i) as f64).sqrt()
            }
        })
        .collect();
    let gamma = seeds.gamma();
    let drive = 2.0 * (seeds.alpha_s() * seeds.alpha_i() * gamma.conj()).re;
    let n = ds * di;
    let mut rho = Array2::from_shape_fn((n, n), |(r, c)| {
        let base = sigma[r] * sigma[c].conj();
        base + (base * drive - gamma * u[r] * sigma[c].conj() - gamma.conj() * sigma[r] * u[c].conj()) * tau
    });
    let asym = hermitian_deviation(&rho);
    let herm = (&rho + &rho.t().mapv(|z| z.conj())) * Complex64::new(0.5, 0.0);
    rho = herm;
    let trace: f64 = rho.diag().iter().map(|z| z.re).sum();
    if trace <= 0.0 {
        return Err(Error::Undefined(format!("first-order density has trace {trace}")));
    }
    rho.mapv_inplace(|z| z / trace);
    log::debug!(
        "first-order density: Hermitian correction {asym:.3e}, trace correction {:.3e}",
        1.0 - trace
    );
    DensityMatrix::new(rho, Basis::new(vec![ModeLabel::Signal, ModeLabel::Idler], vec![ds, di]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn reference(phi: f64) -> SeedTriple {
        SeedTriple::from_intensities(3.0, 3.0, 10.0, phi).unwrap()
    }

    fn coeffs(s: &PerturbativeSeries) -> [f64; 3] {
        [s.c0, s.c1, s.c2]
    }

    #[test]
    fn pump_series_examples() {
        let p = pump_number_series(&reference(0.0));
        assert!((p.c0 - 10.0).abs() < 1e-14);
        assert!((p.c1 - 18.9737).abs() < 1e-4);
        assert!((p.c2 + 61.0).abs() < 1e-12);
        assert!(pump_number_series(&reference(PI / 2.0)).c1.abs() < 1e-14);
        let dark = SeedTriple::new(CoherentSeed::vacuum(), CoherentSeed::vacuum(), 2.0, 0.3).unwrap();
        let d = pump_number_series(&dark);
        assert_eq!(d.c1, 0.0);
        assert_eq!(d.c2, -4.0);
    }

    #[test]
    fn evaluate_examples() {
        let p = pump_number_series(&reference(0.0));
        assert_eq!(evaluate_series(&p, 0.0), p.c0);
        assert!((p.c0 - 10.0).abs() < 1e-14);
        assert!((evaluate_series(&p, 0.05) - 10.7962).abs() < 1e-4);
        assert!((evaluate_series(&p, 0.1) - 11.2874).abs() < 1e-4);
    }

    #[test]
    fn signal_series_examples() {
        let s = signal_number_series(&reference(0.0));
        assert!((s.c0 - 3.0).abs() < 1e-14);
        assert!((s.c1 + 18.9737).abs() < 1e-4);
        assert!((s.c2 - 61.0).abs() < 1e-12);
        let gain = signal_number_series(&reference(PI));
        assert!((gain.c1 - 2.0 * 3.0 * 10.0_f64.sqrt()).abs() < 1e-12 && gain.c1 > 0.0);
    }

    #[test]
    fn second_moment_structure() {
        let seeds = reference(0.7);
        for mode in ModeLabel::ALL {
            let n = number_series(&seeds, mode);
            let m = second_moment_series(&seeds, mode);
            assert_eq!(m.c0, n.c0 * n.c0 + n.c0);
            assert_eq!(m.c1, n.c1 * (1.0 + 2.0 * n.c0));
        }
        // The cos 2 Phi part of the pump second moment is 2 |gamma|^2 |alpha_s|^2 |alpha_i|^2.
        let cos_part = |phi: f64| {
            second_moment_series(&reference(phi), ModeLabel::Pump).c2 - pump_number_series(&reference(phi)).c2
        };
        let amplitude = 0.5 * (cos_part(0.0) - cos_part(PI / 2.0));
        assert!((amplitude - 2.0 * 10.0 * 9.0).abs() < 1e-9);
    }

    #[test]
    fn variance_consistency_with_moments() {
        for phi in [0.0, 0.9, PI] {
            let seeds = SeedTriple::new(
                CoherentSeed::new(1.3, 0.2).unwrap(),
                CoherentSeed::new(0.7, -0.4).unwrap(),
                2.1,
                -0.3 - phi,
            )
            .unwrap();
            for mode in ModeLabel::ALL {
                let n = number_series(&seeds, mode);
                let m = second_moment_series(&seeds, mode);
                let v = variance_series(&seeds, mode);
                assert!((v.c0 - (m.c0 - n.c0 * n.c0)).abs() < 1e-12);
                assert!((v.c1 - (m.c1 - 2.0 * n.c0 * n.c1)).abs() < 1e-12);
                assert!((v.c2 - (m.c2 - 2.0 * n.c0 * n.c2 - n.c1 * n.c1)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn variance_examples() {
        let seeds = reference(0.0);
        let pv = variance_series(&seeds, ModeLabel::Pump);
        assert_eq!(coeffs(&pv), coeffs(&pump_number_series(&seeds)));
        let sv = variance_series(&seeds, ModeLabel::Signal);
        let sn = signal_number_series(&seeds);
        assert_eq!(sv.c0, sn.c0);
        assert_eq!(sv.c1, sn.c1);
        assert!((sv.c2 - sn.c2 - 60.0).abs() < 1e-12);
    }

    #[test]
    fn mandel_q_examples() {
        for phi in [0.0, 1.0, PI / 2.0, PI] {
            for tau in [0.0, 0.01, 0.05] {
                assert_eq!(
                    mandel_q_second_order(&reference(phi), ModeLabel::Pump, tau).unwrap(),
                    0.0
                );
            }
        }
        let tau = 0.02;
        let q0 = mandel_q_second_order(&reference(0.0), ModeLabel::Signal, tau).unwrap();
        let qpi = mandel_q_second_order(&reference(PI), ModeLabel::Signal, tau).unwrap();
        assert!(q0 > qpi && qpi > 0.0);
        let n = signal_number_series(&reference(0.0)).evaluate(tau);
        assert!((q0 - 2.0 * 3.0 * 10.0 * tau * tau / n).abs() < 1e-12);
        for mode in ModeLabel::ALL {
            assert!(mandel_q_first_order(&reference(0.4), mode, 0.03).unwrap().abs() < 1e-15);
        }
        let s = SeedTriple::new(CoherentSeed::new(1.0, 0.0).unwrap(), CoherentSeed::vacuum(), 3.0, 0.0).unwrap();
        let q = mandel_q_second_order(&s, ModeLabel::Signal, tau).unwrap();
        assert!((q - 2.0 * 9.0 * tau * tau / signal_number_series(&s).evaluate(tau)).abs() < 1e-12);
        assert!(matches!(
            mandel_q_second_order(
                &SeedTriple::from_intensities(3.0, 3.0, 0.1, 0.0).unwrap(),
                ModeLabel::Signal,
                1.0
            ),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn first_order_density_at_zero_is_projector() {
        let seeds = SeedTriple::new(
            CoherentSeed::new(0.8, 0.3).unwrap(),
            CoherentSeed::new(0.5, -1.0).unwrap(),
            1.5,
            0.2,
        )
        .unwrap();
        let rho = first_order_reduced_density(&seeds, 0.0, (14, 12)).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        let a = coherent_amplitudes(seeds.alpha_s(), 14).amplitudes;
        let b = coherent_amplitudes(seeds.alpha_i(), 12).amplitudes;
        let e = rho.elements();
        let idx = |s: usize, i: usize| s * 13 + i;
        let scale = 1.0 / (a.iter().map(|x| x.norm_sqr()).sum::<f64>() * b.iter().map(|x| x.norm_sqr()).sum::<f64>());
        let expect = a[2] * b[1] * (a[1] * b[3]).conj() * scale;
        assert!((e[[idx(2, 1), idx(1, 3)]] - expect).norm() < 1e-14);
    }

    #[test]
    fn first_order_diagonal_depends_on_phi_only() {
        let build = |ts: f64, ti: f64, pump: f64| {
            let seeds = SeedTriple::new(
                CoherentSeed::new(1.0, ts).unwrap(),
                CoherentSeed::new(0.9, ti).unwrap(),
                2.0,
                pump,
            )
            .unwrap();
            first_order_reduced_density(&seeds, 0.01, (12, 12)).unwrap()
        };
        let a = build(0.25, 0.5, 0.125);
        let b = build(0.75, -0.5, -0.375);
        let (da, db) = (a.diagonal(), b.diagonal());
        for (x, y) in da.iter().zip(db.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
        let off = (a.elements()[[1, 13]] - b.elements()[[1, 13]]).norm();
        assert!(off > 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn manley_rowe_cancels_exactly(
            ms in 0.0f64..3.0, mi in 0.0f64..3.0, g in 0.0f64..4.0,
            ts in -3.0f64..3.0, ti in -3.0f64..3.0, pp in -3.0f64..3.0,
        ) {
            let seeds = SeedTriple::new(CoherentSeed::new(ms, ts).unwrap(), CoherentSeed::new(mi, ti).unwrap(), g, pp).unwrap();
            let p = pump_number_series(&seeds);
            let s = signal_number_series(&seeds);
            let i = idler_number_series(&seeds);
            prop_assert_eq!(s.c1 + p.c1, 0.0);
            prop_assert_eq!(s.c2 + p.c2, 0.0);
            prop_assert_eq!(s.c1 - i.c1, 0.0);
            prop_assert_eq!(s.c2 - i.c2, 0.0);
        }

        #[test]
        fn coefficients_are_phase_periodic(
            ms in 0.0f64..3.0, mi in 0.0f64..3.0, g in 0.0f64..4.0,
            ts in -3.0f64..3.0, ti in -3.0f64..3.0, pp in -3.0f64..3.0, shift in -2.0f64..2.0,
        ) {
            let a = SeedTriple::new(CoherentSeed::new(ms, ts).unwrap(), CoherentSeed::new(mi, ti).unwrap(), g, pp).unwrap();
            let b = SeedTriple::new(CoherentSeed::new(ms, ts + shift).unwrap(), CoherentSeed::new(mi, ti).unwrap(), g, pp + shift + 2.0 * PI).unwrap();
            for mode in ModeLabel::ALL {
                for (x, y) in [
                    (number_series(&a, mode), number_series(&b, mode)),
                    (second_moment_series(&a, mode), second_moment_series(&b, mode)),
                    (variance_series(&a, mode), variance_series(&b, mode)),
                ] {
                    for (cx, cy) in coeffs(&x).iter().zip(coeffs(&y).iter()) {
                        prop_assert!((cx - cy).abs() < 1e-9 * (1.0 + cx.abs()));
                    }
                }
            }
        }
    }
}
