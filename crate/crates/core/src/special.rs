//! Associated Laguerre polynomials and signed log-Gamma.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `L_n^k(x)` from the three-term recurrence in `n`.
pub fn assoc_laguerre(n: usize, k: usize, x: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if n == 0 {
        return one;
    }
    let kf = k as f64;
    let mut prev = one;
    let mut cur = one * (1.0 + kf) - x;
    for m in 1..n {
        let mf = m as f64;
        let next = ((2.0 * mf + kf + 1.0 - x) * cur - (mf + kf) * prev) / (mf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `P_n = nu^n L_n^k(w / nu)` for `n = 0..=n_max`.
///
/// Scaling by `nu^n` turns the recurrence into one that is polynomial in `nu`, so
/// the sequence stays finite as `nu -> 0` (where `P_n -> (-w)^n / n!`).
pub fn scaled_laguerre_sequence(n_max: usize, k: usize, nu: Complex64, w: Complex64) -> Vec<Complex64> {
    let kf = k as f64;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(Complex64::new(1.0, 0.0));
    if n_max == 0 {
        return out;
    }
    out.push(nu * (kf + 1.0) - w);
    let nu2 = nu * nu;
    for m in 1..n_max {
        let mf = m as f64;
        let next = ((nu * (2.0 * mf + kf + 1.0) - w) * out[m] - nu2 * (mf + kf) * out[m - 1]) / (mf + 1.0);
        out.push(next);
    }
    out
}

/// `ln |Gamma(x)|` and the sign of `Gamma(x)`.
///
/// Nonpositive integers are poles and return [`Error::GammaPole`].
pub fn ln_gamma_signed(x: f64, context: &str) -> Result<(f64, f64)> {
    if x <= 0.0 && x == x.floor() {
        return Err(Error::GammaPole {
            argument: x,
            context: context.to_string(),
        });
    }
    let (lg, sign) = libm::lgamma_r(x);
    Ok((lg, if sign < 0 { -1.0 } else { 1.0 }))
}

/// `Gamma(a) / Gamma(b)` evaluated through log-Gamma.
pub fn gamma_ratio(a: f64, b: f64, context: &str) -> Result<f64> {
    let (la, sa) = ln_gamma_signed(a, context)?;
    let (lb, sb) = ln_gamma_signed(b, context)?;
    Ok(sa * sb * (la - lb).exp())
}

/// `ln n!`.
pub fn ln_factorial(n: usize) -> f64 {
    libm::lgamma_r(n as f64 + 1.0).0
}
