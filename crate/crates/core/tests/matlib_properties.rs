// SPDX-License-Identifier: Apache-2.0

mod common;

use etconsensus::matlib::{care_residual, eigenvalues, kron, mat_exp, solve, solve_care, solve_lyapunov, symmetric_eigenvalues, Mat};
use etconsensus::model::is_hurwitz;
use num_complex::Complex64;
use proptest::prelude::*;

fn mat_strategy(n: usize, scale: f64) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-scale..scale, n * n).prop_map(move |v| Mat::new(n, n, v).unwrap())
}

fn sized_mat(max_n: usize, scale: f64) -> impl Strategy<Value = Mat> {
    (1..=max_n).prop_flat_map(move |n| mat_strategy(n, scale))
}

/// Truncated Taylor series with 30 terms, applied after halving `s` times so
/// that the series converges quickly, then squared back.
fn taylor_exp(m: &Mat, t: f64) -> Mat {
    let n = m.rows();
    let s = ((m.norm_1() * t.abs()).max(1.0).log2().ceil() as i32 + 1).max(0);
    let x = m.scale(t / 2f64.powi(s));
    let mut term = Mat::identity(n);
    let mut sum = Mat::identity(n);
    for k in 1..30 {
        term = (&term * &x).scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn rel_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm_fro() / b.norm_fro().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigenvalues_close_under_conjugation(m in sized_mat(8, 3.0)) {
        let spec = eigenvalues(&m).unwrap();
        prop_assert_eq!(spec.len(), m.rows());
        let conj: Vec<Complex64> = spec.eigenvalues.iter().map(|z| z.conj()).collect();
        let d = etconsensus::matlib::multiset_distance(&spec.eigenvalues, &conj).unwrap();
        prop_assert!(d <= 1e-8, "conjugate mismatch {d}");
        let sum: f64 = spec.eigenvalues.iter().map(|z| z.re).sum();
        prop_assert!((sum - m.trace()).abs() <= 1e-8 * (1.0 + m.norm_fro()));
    }

    #[test]
    fn exp_semigroup(m in sized_mat(6, 2.0), s in -1.5f64..1.5, t in -1.5f64..1.5) {
        let lhs = mat_exp(&m, s + t).unwrap();
        let rhs = &mat_exp(&m, s).unwrap() * &mat_exp(&m, t).unwrap();
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-8, "{}", rel_diff(&lhs, &rhs));
    }

    #[test]
    fn exp_inverse(m in sized_mat(6, 2.0), t in -2.0f64..2.0) {
        let prod = &mat_exp(&m, t).unwrap() * &mat_exp(&m, -t).unwrap();
        let eye = Mat::identity(m.rows());
        prop_assert!((&prod - &eye).max_abs() <= 1e-8);
    }

    #[test]
    fn exp_matches_taylor_series(m in sized_mat(5, 3.0), t in -2.0f64..2.0) {
        let e = mat_exp(&m, t).unwrap();
        let oracle = taylor_exp(&m, t);
        prop_assert!(rel_diff(&e, &oracle) <= 1e-9, "{}", rel_diff(&e, &oracle));
    }

    #[test]
    fn kron_trace_and_product(a in sized_mat(3, 2.0), b in sized_mat(3, 2.0)) {
        let k = kron(&a, &b);
        prop_assert!((k.trace() - a.trace() * b.trace()).abs() <= 1e-12 * (1.0 + k.norm_fro()));
        // (A ⊗ B)(A ⊗ B) = A² ⊗ B²
        let lhs = &k * &k;
        let rhs = kron(&(&a * &a), &(&b * &b));
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn lyapunov_matches_kronecker_oracle(raw in sized_mat(4, 1.0), q0 in sized_mat(4, 1.0)) {
        let n = raw.rows();
        // shift into the open left half plane
        let shift = raw.norm_fro() + 0.5;
        let a = &raw - &Mat::identity(n).scale(shift);
        let q = if q0.rows() == n { q0.symmetrize() } else { Mat::identity(n) };
        let x = solve_lyapunov(&a, &q).unwrap();
        let residual = &(&(&a.transpose() * &x) + &(&x * &a)) + &q;
        prop_assert!(residual.norm_fro() <= 1e-9 * q.norm_fro().max(1e-300) + 1e-15, "{}", residual.norm_fro());
        // independent oracle: column-major vectorization, (I ⊗ aᵀ + aᵀ ⊗ I) vec X = −vec q
        let at = a.transpose();
        let eye = Mat::identity(n);
        let big = &kron(&eye, &at) + &kron(&at, &eye);
        let mut rhs = Mat::zeros(n * n, 1);
        for c in 0..n {
            for r in 0..n {
                rhs[(c * n + r, 0)] = -q[(r, c)];
            }
        }
        let v = solve(&big, &rhs).unwrap();
        for c in 0..n {
            for r in 0..n {
                prop_assert!((v[(c * n + r, 0)] - x[(r, c)]).abs() <= 1e-9 * (1.0 + x.max_abs()));
            }
        }
    }
}

#[test]
fn care_solutions_are_symmetric_psd_and_stabilizing() {
    let mut rng = common::rng(7);
    for case in 0..100 {
        let n = 1 + case % 3;
        let m = 1 + case % n.max(1);
        let (a, b) = common::random_stabilizable_pair(&mut rng, n, m.min(n));
        let p = solve_care(&a, &b).unwrap();
        assert!(p.is_symmetric(1e-10), "case {case}: P not symmetric");
        let min = symmetric_eigenvalues(&p).into_iter().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-9, "case {case}: P has eigenvalue {min}");
        let res = care_residual(&a, &b, &p).norm_fro();
        assert!(res <= 1e-8 * p.norm_fro().max(1.0), "case {case}: residual {res}");
        let closed = &a - &(&(&b * &b.transpose()) * &p);
        assert!(is_hurwitz(&closed).unwrap(), "case {case}: A - BBᵀP not Hurwitz");
    }
}

#[test]
fn rotation_exponential_closed_form() {
    let m = Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
    for k in 0..50 {
        let t = -5.0 + 0.2 * k as f64;
        let e = mat_exp(&m, t).unwrap();
        let expected = Mat::from_rows(&[[t.cos(), t.sin()], [-t.sin(), t.cos()]]).unwrap();
        assert!((&e - &expected).max_abs() <= 1e-10, "t = {t}");
    }
}
