// SPDX-License-Identifier: Apache-2.0

//! Eigenvalues of real non-symmetric matrices.
//!
//! Householder reduction to upper Hessenberg form followed by the implicit
//! Francis double-shift QR iteration. Complex pairs come out of 2x2 diagonal
//! blocks and are therefore exact conjugates of each other.

use num_complex::Complex64;

use super::{tol, Mat, MatError, Result, Spectrum};

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Relative threshold below which a subdiagonal entry is treated as zero.
    pub tol: f64,
    /// Total QR sweeps allowed, per unit dimension.
    pub iterations_per_dim: usize,
    /// Name reported in non-convergence errors.
    pub label: &'static str,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: tol::EIG_CONVERGENCE,
            iterations_per_dim: tol::EIG_ITERATIONS_PER_DIM,
            label: "matrix",
        }
    }
}

pub fn eigenvalues(m: &Mat) -> Result<Spectrum> {
    eigenvalues_with(m, EigenOptions::default())
}

pub fn eigenvalues_with(m: &Mat, opts: EigenOptions) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(MatError::dim(
            "eigenvalues",
            format!("{} is {}x{}, not square", opts.label, m.rows(), m.cols()),
        ));
    }
    let n = m.rows();
    if n == 1 {
        return Ok(Spectrum { eigenvalues: vec![Complex64::new(m[(0, 0)], 0.0)] });
    }
    let mut h = m.clone();
    reduce_to_hessenberg(&mut h);
    let eigenvalues = hessenberg_qr(&mut h, opts.tol, opts.iterations_per_dim * n).map_err(
        |sweeps| {
            MatError::numerical(
                "eigenvalues",
                format!(
                    "QR iteration on {} ({n}x{n}, |m|_F = {:.3e}) did not converge in {sweeps} sweeps",
                    opts.label,
                    m.norm_fro()
                ),
            )
        },
    )?;
    Ok(Spectrum { eigenvalues })
}

fn reduce_to_hessenberg(a: &mut Mat) {
    let n = a.rows();
    let mut v = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let norm = (k + 1..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        for (t, i) in (k + 1..n).enumerate() {
            v[t] = a[(i, k)];
        }
        v[0] -= alpha;
        let vnorm = v[..len].iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for x in &mut v[..len] {
            *x /= vnorm;
        }
        // A <- H A
        for j in k..n {
            let s: f64 = (0..len).map(|t| v[t] * a[(k + 1 + t, j)]).sum();
            for t in 0..len {
                a[(k + 1 + t, j)] -= 2.0 * v[t] * s;
            }
        }
        // A <- A H
        for i in 0..n {
            let s: f64 = (0..len).map(|t| v[t] * a[(i, k + 1 + t)]).sum();
            for t in 0..len {
                a[(i, k + 1 + t)] -= 2.0 * s * v[t];
            }
        }
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Returns the sweep
/// count on failure.
fn hessenberg_qr(h: &mut Mat, tol: f64, max_sweeps: usize) -> Result<Vec<Complex64>, usize> {
    let n = h.rows() as isize;
    macro_rules! a {
        ($i:expr, $j:expr) => {
            h[(($i) as usize, ($j) as usize)]
        };
    }
    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += a!(i, j).abs();
        }
    }
    let mut wr = vec![0.0; n as usize];
    let mut wi = vec![0.0; n as usize];
    let mut nn = n - 1;
    let mut shift_acc = 0.0;
    let mut sweeps = 0usize;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let mut l = nn;
            while l >= 1 {
                let mut s = a!(l - 1, l - 1).abs() + a!(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a!(l, l - 1).abs() <= tol * s {
                    a!(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a!(nn, nn);
            if l == nn {
                wr[nn as usize] = x + shift_acc;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a!(nn - 1, nn - 1);
            let mut w = a!(nn, nn - 1) * a!(nn - 1, nn);
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += shift_acc;
                let (u, v) = (nn as usize - 1, nn as usize);
                if q >= 0.0 {
                    let z = p + sign(z, p);
                    wr[u] = x + z;
                    wr[v] = if z != 0.0 { x - w / z } else { x + z };
                    wi[u] = 0.0;
                    wi[v] = 0.0;
                } else {
                    wr[u] = x + p;
                    wr[v] = x + p;
                    wi[u] = -z;
                    wi[v] = z;
                }
                nn -= 2;
                break;
            }
            if sweeps >= max_sweeps {
                return Err(sweeps);
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                shift_acc += x;
                for i in 0..=nn {
                    a!(i, i) -= x;
                }
                let s = a!(nn, nn - 1).abs() + a!(nn - 1, nn - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            sweeps += 1;
            let (mut p, mut q, mut r);
            let mut m = nn - 2;
            loop {
                let z = a!(m, m);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a!(m + 1, m) + a!(m, m + 1);
                q = a!(m + 1, m + 1) - z - rr - ss;
                r = a!(m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a!(m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (a!(m - 1, m - 1).abs() + z.abs() + a!(m + 1, m + 1).abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a!(i, i - 2) = 0.0;
                if i != m + 2 {
                    a!(i, i - 3) = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                let mut scale = 0.0;
                if k != m {
                    p = a!(k, k - 1);
                    q = a!(k + 1, k - 1);
                    r = if k != nn - 1 { a!(k + 2, k - 1) } else { 0.0 };
                    scale = p.abs() + q.abs() + r.abs();
                    if scale != 0.0 {
                        p /= scale;
                        q /= scale;
                        r /= scale;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a!(k, k - 1) = -a!(k, k - 1);
                        }
                    } else {
                        a!(k, k - 1) = -s * scale;
                    }
                    p += s;
                    let xx = p / s;
                    let yy = q / s;
                    let zz = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a!(k, j) + q * a!(k + 1, j);
                        if k != nn - 1 {
                            pp += r * a!(k + 2, j);
                            a!(k + 2, j) -= pp * zz;
                        }
                        a!(k + 1, j) -= pp * yy;
                        a!(k, j) -= pp * xx;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = xx * a!(i, k) + yy * a!(i, k + 1);
                        if k != nn - 1 {
                            pp += zz * a!(i, k + 2);
                            a!(i, k + 2) -= pp * r;
                        }
                        a!(i, k + 1) -= pp * q;
                        a!(i, k) -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}
