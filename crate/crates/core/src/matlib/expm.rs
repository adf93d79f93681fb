// SPDX-License-Identifier: Apache-2.0

//! Matrix exponential by scaling and squaring with a diagonal Padé
//! approximant.
//!
//! The argument is scaled by `2^-s` until its 1-norm is at most 0.5. At that
//! size the degree-7 approximant is accurate to unit roundoff (its backward
//! error threshold is about 0.95), so the remaining error comes from the
//! squaring phase.

use super::{lu::Lu, Mat, MatError, Result};

const DEGREE: usize = 7;
const SCALED_NORM: f64 = 0.5;

fn pade_coefficients() -> [f64; DEGREE + 1] {
    // c_k = (2q - k)! q! / ((2q)! k! (q - k)!) computed by the recurrence
    // c_{k+1} = c_k (q - k) / ((2q - k)(k + 1)).
    let q = DEGREE as f64;
    let mut c = [0.0; DEGREE + 1];
    c[0] = 1.0;
    for k in 0..DEGREE {
        let kf = k as f64;
        c[k + 1] = c[k] * (q - kf) / ((2.0 * q - kf) * (kf + 1.0));
    }
    c
}

/// `e^{m·t}`.
pub fn mat_exp(m: &Mat, t: f64) -> Result<Mat> {
    if !m.is_square() {
        return Err(MatError::dim("mat_exp", format!("{}x{} is not square", m.rows(), m.cols())));
    }
    if !t.is_finite() {
        return Err(MatError::precondition("mat_exp", format!("time {t} is not finite")));
    }
    let n = m.rows();
    if t == 0.0 {
        return Ok(Mat::identity(n));
    }
    let x = m.scale(t);
    let norm = x.norm_1();
    let squarings = if norm > SCALED_NORM { (norm / SCALED_NORM).log2().ceil() as u32 } else { 0 };
    let x = x.scale(0.5f64.powi(squarings as i32));

    let c = pade_coefficients();
    let mut numer = Mat::identity(n).scale(c[0]);
    let mut denom = numer.clone();
    let mut power = Mat::identity(n);
    for (k, ck) in c.iter().enumerate().skip(1) {
        power = &power * &x;
        let term = power.scale(*ck);
        numer = &numer + &term;
        denom = if k % 2 == 0 { &denom + &term } else { &denom - &term };
    }
    let mut r = Lu::factor(&denom)?.solve_mat(&numer)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}
