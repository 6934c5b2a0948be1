//! Dense complex linear algebra on top of faer.

use faer::{Mat, Side};
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Bound on `h * ||G||` for one Taylor substep of [`expm_apply`].
const EXPM_STEP_BOUND: f64 = 1.0;
const EXPM_MAX_TERMS: usize = 100;

pub(crate) fn to_faer(a: &Array2<Complex64>) -> Mat<faer::c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigenvalues of a Hermitian matrix, in ascending order.
pub fn hermitian_eigenvalues(a: &Array2<Complex64>) -> Result<Vec<f64>> {
    check_square(a)?;
    to_faer(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("Hermitian eigenvalues: {e:?}")))
}

/// Eigenvalues (ascending) with `max_k ||A v_k - lambda_k v_k||`.
pub fn hermitian_eigen_with_residual(a: &Array2<Complex64>) -> Result<(Vec<f64>, f64)> {
    check_square(a)?;
    let m = to_faer(a);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("Hermitian eigendecomposition: {e:?}")))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    let n = a.nrows();
    let values: Vec<f64> = (0..n).map(|k| s[k].re).collect();
    let av = &m * u;
    let mut residual: f64 = 0.0;
    for k in 0..n {
        let mut r2 = 0.0;
        for i in 0..n {
            r2 += (av[(i, k)] - u[(i, k)] * values[k]).norm_sqr();
        }
        residual = residual.max(r2.sqrt());
    }
    Ok((values, residual))
}

/// Largest eigenvalue of a Hermitian matrix and a unit eigenvector for it.
pub fn hermitian_top_eigenvector(a: &Array2<Complex64>) -> Result<(f64, Vec<Complex64>)> {
    check_square(a)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix has no eigenvector".into()));
    }
    let evd = to_faer(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("Hermitian eigendecomposition: {e:?}")))?;
    let u = evd.U();
    let top = evd.S().column_vector()[n - 1].re;
    Ok((top, (0..n).map(|i| u[(i, n - 1)]).collect()))
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &Array2<Complex64>) -> Result<Vec<f64>> {
    to_faer(a)
        .singular_values()
        .map_err(|e| Error::Linalg(format!("singular values: {e:?}")))
}

pub fn singular_values_real(a: &Array2<f64>) -> Result<Vec<f64>> {
    Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
        .singular_values()
        .map_err(|e| Error::Linalg(format!("singular values: {e:?}")))
}

/// Largest absolute entry, used as a cheap matrix scale.
pub fn max_abs(a: &Array2<Complex64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `0.5 * ||a - b||_1` for Hermitian `a`, `b`.
pub fn trace_distance(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::BasisMismatch(format!(
            "trace distance between {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = a - b;
    let eig = hermitian_eigenvalues(&diff)?;
    Ok(0.5 * eig.iter().map(|l| l.abs()).sum::<f64>())
}

fn check_square(a: &Array2<Complex64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::BasisMismatch(format!("matrix {:?} is not square", a.dim())));
    }
    Ok(())
}

/// Computes `exp(G) v` in place, where `apply(x, out)` writes `G x` into `out`
/// and `norm_bound >= ||G||`.
///
/// The exponential is split into substeps with `h ||G|| <= 1`, each summed as a
/// Taylor series until the next term is negligible against the partial sum.
pub fn expm_apply<F>(apply: F, v: &mut [Complex64], norm_bound: f64) -> Result<()>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    if !norm_bound.is_finite() || norm_bound < 0.0 {
        return Err(Error::InvalidArgument(format!("generator norm bound {norm_bound}")));
    }
    if norm_bound == 0.0 {
        return Ok(());
    }
    let steps = (norm_bound / EXPM_STEP_BOUND).ceil().max(1.0) as usize;
    let h = 1.0 / steps as f64;
    let n = v.len();
    let mut term = vec![Complex64::new(0.0, 0.0); n];
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..steps {
        acc.copy_from_slice(v);
        term.copy_from_slice(v);
        let mut converged = false;
        for j in 1..=EXPM_MAX_TERMS {
            apply(&term, &mut next);
            let scale = h / j as f64;
            for (t, x) in term.iter_mut().zip(next.iter()) {
                *t = x * scale;
            }
            let mut term_norm = 0.0;
            let mut acc_norm = 0.0;
            for (a, t) in acc.iter_mut().zip(term.iter()) {
                *a += t;
                term_norm += t.norm_sqr();
                acc_norm += a.norm_sqr();
            }
            if term_norm.sqrt() <= 1e-16 * acc_norm.sqrt() {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::ConvergenceFailure(format!(
                "operator exponential did not converge in {EXPM_MAX_TERMS} terms (norm bound {norm_bound})"
            )));
        }
        v.copy_from_slice(&acc);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        let mut a = Array2::zeros((3, 3));
        a[[0, 0]] = Complex64::new(0.5, 0.0);
        a[[1, 1]] = Complex64::new(-1.0, 0.0);
        a[[2, 2]] = Complex64::new(2.0, 0.0);
        let (vals, res) = hermitian_eigen_with_residual(&a).unwrap();
        assert_eq!(vals.len(), 3);
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[2] - 2.0).abs() < 1e-14);
        assert!(res < 1e-14);
    }

    #[test]
    fn pauli_y_spectrum_and_trace_distance() {
        let mut y = Array2::zeros((2, 2));
        y[[0, 1]] = Complex64::new(0.0, -1.0);
        y[[1, 0]] = Complex64::new(0.0, 1.0);
        let vals = hermitian_eigenvalues(&y).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let z = Array2::zeros((2, 2));
        assert!((trace_distance(&y, &z).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn expm_rotation() {
        // G = theta * [[0, -1], [1, 0]] rotates by theta.
        let theta = 7.3;
        let apply = |x: &[Complex64], out: &mut [Complex64]| {
            out[0] = -x[1] * theta;
            out[1] = x[0] * theta;
        };
        let mut v = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        expm_apply(apply, &mut v, theta).unwrap();
        assert!((v[0].re - theta.cos()).abs() < 1e-13);
        assert!((v[1].re - theta.sin()).abs() < 1e-13);
    }
}
