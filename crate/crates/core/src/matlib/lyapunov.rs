// SPDX-License-Identifier: Apache-2.0

use super::{eigenvalues, kron, lu::Lu, Mat, MatError, Result};

/// Solves `aᵀX + Xa + q = 0` for symmetric `X`.
pub fn solve_lyapunov(a: &Mat, q: &Mat) -> Result<Mat> {
    solve_lyapunov_with(a, q, 0.0)
}

/// As [`solve_lyapunov`], requiring the spectral abscissa of `a` to be below
/// `-margin`.
///
/// The equation is vectorized as `(aᵀ ⊗ I + I ⊗ aᵀ) vec(X) = -vec(q)` and
/// solved directly, which is fine for the n ≤ 6 systems used here (n² ≤ 36
/// unknowns).
pub fn solve_lyapunov_with(a: &Mat, q: &Mat, margin: f64) -> Result<Mat> {
    if !a.is_square() {
        return Err(MatError::dim("solve_lyapunov", "state matrix is not square"));
    }
    if q.shape() != a.shape() {
        return Err(MatError::dim(
            "solve_lyapunov",
            format!("q is {}x{}, a is {}x{}", q.rows(), q.cols(), a.rows(), a.cols()),
        ));
    }
    let sym_tol = 1e-12 * q.max_abs().max(1.0);
    if !q.is_symmetric(sym_tol) {
        return Err(MatError::precondition("solve_lyapunov", "q is not symmetric"));
    }
    let abscissa = eigenvalues(a)?.abscissa();
    if abscissa >= -margin {
        return Err(MatError::precondition(
            "solve_lyapunov",
            format!("a is not Hurwitz (spectral abscissa {abscissa:.3e})"),
        ));
    }
    let n = a.rows();
    let at = a.transpose();
    let eye = Mat::identity(n);
    let op = &kron(&at, &eye) + &kron(&eye, &at);
    let rhs: Vec<f64> = q.as_slice().iter().map(|v| -v).collect();
    let x = Lu::factor(&op)?.solve_vec(&rhs)?;
    Ok(Mat::new(n, n, x)?.symmetrize())
}
