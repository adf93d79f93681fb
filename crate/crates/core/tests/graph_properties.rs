// SPDX-License-Identifier: Apache-2.0

mod common;

use etconsensus::graph::DirectedGraph;
use etconsensus::matlib::{eigenvalues, Mat};
use etconsensus::model::nonzero_laplacian_eigenvalues;
use num_complex::Complex64;
use rand::Rng;

/// Characteristic polynomial coefficients `[1, c₁, …, cₙ]` of `det(λI − m)`
/// by the Faddeev–LeVerrier recursion.
fn char_poly(m: &Mat) -> Vec<f64> {
    let n = m.rows();
    let mut coeffs = vec![1.0];
    let mut mk = Mat::zeros(n, n);
    for k in 1..=n {
        let shifted = &mk + &Mat::identity(n).scale(coeffs[k - 1]);
        mk = m * &shifted;
        coeffs.push(-mk.trace() / k as f64);
    }
    coeffs
}

fn eval(coeffs: &[f64], z: Complex64) -> (Complex64, f64) {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for c in coeffs {
        acc = acc * z + c;
        scale = scale * z.norm().max(1.0) + c.abs();
    }
    (acc, scale)
}

#[test]
fn spanning_tree_graphs_have_simple_zero_eigenvalue() {
    let mut rng = common::rng(11);
    for case in 0..50 {
        let n = rng.gen_range(2..=8);
        let g = common::random_spanning_tree_graph(&mut rng, n, 0.25);
        assert!(g.has_spanning_tree());
        let l = g.laplacian();
        let ones = vec![1.0; n];
        assert!(l.matvec(&ones).unwrap().iter().all(|v| v.abs() <= 1e-12), "case {case}: L·1 ≠ 0");
        let spec = eigenvalues(&l).unwrap();
        let zeros = spec.eigenvalues.iter().filter(|z| z.norm() <= 1e-8).count();
        assert_eq!(zeros, 1, "case {case}: {:?}", spec.sorted());
        // nonzero eigenvalues of a Laplacian lie in the open right half plane
        let rest = nonzero_laplacian_eigenvalues(&g).unwrap();
        assert_eq!(rest.len(), n - 1);
        assert!(rest.iter().all(|z| z.re > 0.0));
    }
}

#[test]
fn laplacian_eigenvalues_are_roots_of_characteristic_polynomial() {
    let mut rng = common::rng(12);
    for case in 0..50 {
        let n = rng.gen_range(2..=7);
        let g = common::random_spanning_tree_graph(&mut rng, n, 0.4);
        let l = g.laplacian();
        let coeffs = char_poly(&l);
        // det(L) = 0 and the trace is the sum of in-degrees
        assert!(coeffs[n].abs() <= 1e-9 * (1.0 + coeffs.iter().map(|c| c.abs()).sum::<f64>()), "case {case}");
        let spec = eigenvalues(&l).unwrap();
        for z in &spec.eigenvalues {
            let (p, scale) = eval(&coeffs, *z);
            assert!(p.norm() <= 1e-9 * scale, "case {case}: |p({z})| = {}", p.norm());
        }
    }
}

#[test]
fn graphs_without_spanning_tree_have_repeated_zero() {
    // two disjoint chains
    let g = DirectedGraph::from_edges(4, &[(1, 0, 1.0), (3, 2, 1.0)]).unwrap();
    assert!(!g.has_spanning_tree());
    let spec = eigenvalues(&g.laplacian()).unwrap();
    assert_eq!(spec.eigenvalues.iter().filter(|z| z.norm() <= 1e-8).count(), 2);
    assert!(nonzero_laplacian_eigenvalues(&g).is_err());
}

#[test]
fn six_agent_laplacian_spectrum() {
    let spec = eigenvalues(&common::six_agent_graph().laplacian()).unwrap();
    let expected = [
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(2.0, 0.0),
        Complex64::new(3.324718, 0.0),
        Complex64::new(1.337641, 0.562280),
        Complex64::new(1.337641, -0.562280),
    ];
    let d = etconsensus::matlib::multiset_distance(&spec.eigenvalues, &expected).unwrap();
    assert!(d < 1e-5, "{d}");
    // char poly oracle for the same matrix
    let coeffs = char_poly(&common::six_agent_graph().laplacian());
    for z in &spec.eigenvalues {
        let (p, scale) = eval(&coeffs, *z);
        assert!(p.norm() <= 1e-10 * scale);
    }
}
