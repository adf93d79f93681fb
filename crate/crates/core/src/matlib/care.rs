// SPDX-License-Identifier: Apache-2.0

//! Continuous algebraic Riccati equation `AᵀP + PA − PBBᵀP + I = 0`.
//!
//! Newton-Kleinman: starting from a stabilizing gain `K₀`, each step solves
//! the Lyapunov equation `(A − BKₖ)ᵀPₖ + Pₖ(A − BKₖ) + I + KₖᵀKₖ = 0` and
//! sets `Kₖ₊₁ = BᵀPₖ`. Every iterate stays stabilizing and the sequence
//! converges quadratically to the stabilizing solution.

use super::{eigenvalues, lu::Lu, singular_values, solve_lyapunov_with, tol, Mat, MatError, Result};

#[derive(Debug, Clone, Copy)]
pub struct CareOptions {
    /// Stop once `‖residual‖_F ≤ residual_tol · max(1, ‖P‖_F)`.
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl Default for CareOptions {
    fn default() -> Self {
        CareOptions { residual_tol: tol::CARE_RESIDUAL, max_iterations: tol::CARE_MAX_ITERATIONS }
    }
}

pub fn solve_care(a: &Mat, b: &Mat) -> Result<Mat> {
    solve_care_with(a, b, CareOptions::default())
}

/// `AᵀP + PA − PBBᵀP + I`.
pub fn care_residual(a: &Mat, b: &Mat, p: &Mat) -> Mat {
    let pb = p * b;
    let quad = &pb * &pb.transpose();
    let lin = &(&a.transpose() * p) + &(p * a);
    &(&lin - &quad) + &Mat::identity(a.rows())
}

pub fn solve_care_with(a: &Mat, b: &Mat, opts: CareOptions) -> Result<Mat> {
    if !a.is_square() {
        return Err(MatError::dim("solve_care", "state matrix is not square"));
    }
    if b.rows() != a.rows() {
        return Err(MatError::dim(
            "solve_care",
            format!("input matrix has {} rows, state dimension is {}", b.rows(), a.rows()),
        ));
    }
    if !is_stabilizable(a, b, tol::RANK)? {
        return Err(MatError::precondition("solve_care", "(a, b) is not stabilizable"));
    }
    let n = a.rows();
    let bt = b.transpose();
    let mut gain = stabilizing_seed(a, b)?;
    let newton_step = |gain: &Mat, iteration: usize| -> Result<Mat> {
        let closed = &(a - &(b * gain));
        let q = &Mat::identity(n) + &(&gain.transpose() * gain);
        solve_lyapunov_with(closed, &q, 0.0).map_err(|e| match e {
            MatError::Precondition { detail, .. } => MatError::numerical(
                "solve_care",
                format!("Newton iterate {iteration} lost stability: {detail}"),
            ),
            other => other,
        })
    };
    let mut last_residual = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        let p = newton_step(&gain, iteration)?;
        let residual = care_residual(a, b, &p).norm_fro();
        if residual <= opts.residual_tol * p.norm_fro().max(1.0) {
            // One more step costs little and, with quadratic convergence,
            // usually lands on roundoff level.
            if let Ok(refined) = newton_step(&(&bt * &p), iteration + 1) {
                if care_residual(a, b, &refined).norm_fro() < residual {
                    return Ok(refined);
                }
            }
            return Ok(p);
        }
        last_residual = residual;
        gain = &bt * &p;
    }
    Err(MatError::numerical(
        "solve_care",
        format!(
            "Newton-Kleinman did not converge in {} iterations (residual {last_residual:.3e})",
            opts.max_iterations
        ),
    ))
}

/// A gain `K` with `a − bK` Hurwitz. Zero when `a` already is; otherwise
/// Bass's construction on the shifted matrix `a + βI`.
fn stabilizing_seed(a: &Mat, b: &Mat) -> Result<Mat> {
    let n = a.rows();
    let spectrum = eigenvalues(a)?;
    if spectrum.abscissa() < -tol::HURWITZ_MARGIN {
        return Ok(Mat::zeros(b.cols(), n));
    }
    // β makes −(a + βI) Hurwitz with unit margin.
    let min_re = spectrum.eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let beta = (-min_re).max(0.0) + a.norm_fro().max(1.0);
    let shifted = &(a + &Mat::identity(n).scale(beta)).transpose().scale(-1.0);
    // (a + βI)Z + Z(a + βI)ᵀ = 2bbᵀ
    let q = (b * &b.transpose()).scale(2.0);
    let z = solve_lyapunov_with(shifted, &q, 0.0)?;
    let z_inv = Lu::factor(&z)
        .map_err(|_| {
            MatError::numerical(
                "solve_care",
                "cannot build a stabilizing seed gain (controllability Gramian is singular)",
            )
        })?
        .solve_mat(&Mat::identity(n))?;
    let gain = &b.transpose() * &z_inv;
    let abscissa = eigenvalues(&(a - &(b * &gain)))?.abscissa();
    if abscissa >= 0.0 {
        return Err(MatError::numerical(
            "solve_care",
            format!("seed gain is not stabilizing (abscissa {abscissa:.3e})"),
        ));
    }
    Ok(gain)
}

/// PBH test: `[a − λI, b]` has full row rank for every eigenvalue λ of `a`
/// with nonnegative real part. Complex λ is handled through the real
/// embedding `[[a − Re λ I, Im λ I, b, 0], [−Im λ I, a − Re λ I, 0, b]]`,
/// which has rank 2n exactly when the complex matrix has rank n.
pub fn is_stabilizable(a: &Mat, b: &Mat, rank_tol: f64) -> Result<bool> {
    if !a.is_square() || b.rows() != a.rows() {
        return Err(MatError::dim(
            "check_stabilizable",
            format!("a is {}x{}, b is {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let n = a.rows();
    let m = b.cols();
    for lambda in eigenvalues(a)?.eigenvalues {
        if lambda.re < 0.0 {
            continue;
        }
        let shifted = a - &Mat::identity(n).scale(lambda.re);
        let pencil = if lambda.im == 0.0 {
            shifted.hstack(b)?
        } else {
            let mut e = Mat::zeros(2 * n, 2 * n + 2 * m);
            let im = Mat::identity(n).scale(lambda.im);
            e.set_block(0, 0, &shifted);
            e.set_block(0, n, &im);
            e.set_block(n, 0, &im.scale(-1.0));
            e.set_block(n, n, &shifted);
            e.set_block(0, 2 * n, b);
            e.set_block(n, 2 * n + m, b);
            e
        };
        let sv = singular_values(&pencil);
        let rank_needed = pencil.rows();
        let threshold = rank_tol * sv[0].max(f64::MIN_POSITIVE);
        if sv.len() < rank_needed || sv[rank_needed - 1] <= threshold {
            return Ok(false);
        }
    }
    Ok(true)
}
