// SPDX-License-Identifier: Apache-2.0

//! Closed-loop analysis objects and gain synthesis.
//!
//! For agent `i`, the stacked differences `θᵢ = [xᵢ − xₚ]ₚ≠ᵢ` obey
//! `θ̇ᵢ = Ωᵢθᵢ` under the continuous protocol, with
//! `Ωᵢ = I ⊗ A + (dᵢ + 1aᵢ* − Aᵢ*) ⊗ BK`. The disagreement `δ = [xₚ − x₁]ₚ≥₂`
//! under the event-triggered protocol obeys `δ̇ = Πδ + We`. All these
//! matrices share the spectrum `⋃ₛ λ(A + λₛ(L)BK)` over the nonzero
//! Laplacian eigenvalues, which is what the consensus condition is about.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{DirectedGraph, GraphError};
use crate::matlib::{self, eigenvalues, kron, tol, Mat, MatError, Spectrum};

/// A Laplacian eigenvalue with modulus at or below this is the zero one.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;
/// Default slack added to `1 / min Re λₛ(L)` when synthesizing a gain.
pub const DEFAULT_C_MARGIN: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("consensus needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("assumption violated: the communication graph has no directed spanning tree")]
    NoSpanningTree,
    #[error("assumption violated: (A, B) is not stabilizable")]
    NotStabilizable,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("gain design failed verification: {0}")]
    DesignVerification(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: Mat,
    b: Mat,
    k: Mat,
    graph: DirectedGraph,
}

impl SystemModel {
    pub fn new(a: Mat, b: Mat, k: Mat, graph: DirectedGraph) -> Result<Self, ModelError> {
        let n = a.rows();
        if !a.is_square() {
            return Err(ModelError::Dimension(format!("A is {}x{}, must be square", n, a.cols())));
        }
        if b.rows() != n {
            return Err(ModelError::Dimension(format!("B has {} rows, A is {n}x{n}", b.rows())));
        }
        if k.shape() != (b.cols(), n) {
            return Err(ModelError::Dimension(format!(
                "K is {}x{}, expected {}x{n}",
                k.rows(),
                k.cols(),
                b.cols()
            )));
        }
        if graph.n_agents() < 2 {
            return Err(ModelError::TooFewAgents(graph.n_agents()));
        }
        Ok(SystemModel { a, b, k, graph })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn k(&self) -> &Mat {
        &self.k
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn n_agents(&self) -> usize {
        self.graph.n_agents()
    }

    /// Same system with a different gain.
    pub fn with_gain(&self, k: Mat) -> Result<Self, ModelError> {
        SystemModel::new(self.a.clone(), self.b.clone(), k, self.graph.clone())
    }

    pub fn bk(&self) -> Mat {
        &self.b * &self.k
    }

    /// `aᵢ*`: row `i` of the adjacency with entry `i` dropped.
    pub fn reduced_adjacency_row(&self, i: usize) -> Vec<f64> {
        (0..self.n_agents()).filter(|&q| q != i).map(|q| self.graph.weight(i, q)).collect()
    }
}

/// `dᵢ + 1aᵢ* − Aᵢ*` over the agents other than `i`, in ascending order.
pub fn omega_coefficients(graph: &DirectedGraph, i: usize) -> Mat {
    let n = graph.n_agents();
    let others: Vec<usize> = (0..n).filter(|&p| p != i).collect();
    let mut c = Mat::zeros(n - 1, n - 1);
    for (r, &p) in others.iter().enumerate() {
        for (s, &q) in others.iter().enumerate() {
            let diag = if p == q { graph.degree(p) } else { 0.0 };
            c[(r, s)] = diag + graph.weight(i, q) - graph.weight(p, q);
        }
    }
    c
}

pub fn build_omega(model: &SystemModel, i: usize) -> Result<Mat, ModelError> {
    let n = model.n_agents();
    if i >= n {
        return Err(GraphError::IndexOutOfRange { index: i, n }.into());
    }
    let coeff = omega_coefficients(&model.graph, i);
    Ok(&kron(&Mat::identity(n - 1), &model.a) + &kron(&coeff, &model.bk()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopMatrices {
    /// `Ωᵢ` for every agent.
    pub omega: Vec<Mat>,
    /// `Π`, `(N−1)n` square.
    pub pi_mat: Mat,
    /// `W`, `(N−1)n × Nn`.
    pub w_mat: Mat,
}

/// `L₂₂ + 1a₁*`: the disagreement coefficient matrix.
pub fn pi_coefficients(graph: &DirectedGraph) -> Mat {
    let n = graph.n_agents();
    let l = graph.laplacian();
    let mut c = Mat::zeros(n - 1, n - 1);
    for p in 1..n {
        for q in 1..n {
            c[(p - 1, q - 1)] = l[(p, q)] + graph.weight(0, q);
        }
    }
    c
}

/// Measurement-error coefficients of `δ̇ₚ`: row `p` is `lₚ − l₁` for
/// `p = 2..N`.
pub fn w_coefficients(graph: &DirectedGraph) -> Mat {
    let n = graph.n_agents();
    let l = graph.laplacian();
    let mut c = Mat::zeros(n - 1, n);
    for p in 1..n {
        for q in 0..n {
            c[(p - 1, q)] = l[(p, q)] - l[(0, q)];
        }
    }
    c
}

pub fn build_pi_w(model: &SystemModel) -> Result<ClosedLoopMatrices, ModelError> {
    let n = model.n_agents();
    let bk = model.bk();
    let pi_mat = &kron(&Mat::identity(n - 1), &model.a) + &kron(&pi_coefficients(&model.graph), &bk);
    let w_mat = kron(&w_coefficients(&model.graph), &bk);
    let omega = (0..n).map(|i| build_omega(model, i)).collect::<Result<_, _>>()?;
    Ok(ClosedLoopMatrices { omega, pi_mat, w_mat })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurwitzVerdict {
    pub hurwitz: bool,
    pub abscissa: f64,
    /// Abscissa within `[-margin, 0]`: too close to call.
    pub marginal: bool,
}

impl HurwitzVerdict {
    pub fn from_abscissa(abscissa: f64) -> Self {
        HurwitzVerdict {
            hurwitz: abscissa < -tol::HURWITZ_MARGIN,
            abscissa,
            marginal: (-tol::HURWITZ_MARGIN..=0.0).contains(&abscissa),
        }
    }
}

pub fn hurwitz_verdict(m: &Mat) -> Result<HurwitzVerdict, ModelError> {
    Ok(HurwitzVerdict::from_abscissa(eigenvalues(m)?.abscissa()))
}

pub fn is_hurwitz(m: &Mat) -> Result<bool, ModelError> {
    Ok(hurwitz_verdict(m)?.hurwitz)
}

/// Real `2n` embedding of the complex matrix `A + λBK`. Its spectrum is
/// `λ(A + λBK) ∪ λ(A + λ̄BK)`.
pub fn complex_closed_loop_embedding(a: &Mat, bk: &Mat, lambda: Complex64) -> Mat {
    let n = a.rows();
    let re = a + &bk.scale(lambda.re);
    let im = bk.scale(lambda.im);
    let mut e = Mat::zeros(2 * n, 2 * n);
    e.set_block(0, 0, &re);
    e.set_block(0, n, &im.scale(-1.0));
    e.set_block(n, 0, &im);
    e.set_block(n, n, &re);
    e
}

/// Laplacian eigenvalues with the zero one removed.
pub fn nonzero_laplacian_eigenvalues(graph: &DirectedGraph) -> Result<Vec<Complex64>, ModelError> {
    if !graph.has_spanning_tree() {
        return Err(ModelError::NoSpanningTree);
    }
    let mut ev = eigenvalues(&graph.laplacian())?.eigenvalues;
    let (idx, zero) = ev
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .map(|(i, z)| (i, *z))
        .expect("graph has at least one agent");
    if zero.norm() > ZERO_EIGENVALUE_TOL {
        return Err(ModelError::Mat(MatError::Numerical {
            op: "nonzero_laplacian_eigenvalues",
            detail: format!("smallest Laplacian eigenvalue has modulus {:.3e}", zero.norm()),
        }));
    }
    ev.remove(idx);
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvalueCheck {
    pub lambda_re: f64,
    pub lambda_im: f64,
    /// Largest real part over the spectrum of `A + λBK`.
    pub max_real_part: f64,
    pub hurwitz: bool,
    pub marginal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub holds: bool,
    pub per_eigenvalue: Vec<EigenvalueCheck>,
}

impl ConditionReport {
    pub fn any_marginal(&self) -> bool {
        self.per_eigenvalue.iter().any(|c| c.marginal)
    }
}

/// Checks that `A + λₛ(L)BK` is Hurwitz for every nonzero Laplacian
/// eigenvalue, the necessary and sufficient consensus condition.
pub fn check_consensus_condition(model: &SystemModel) -> Result<ConditionReport, ModelError> {
    let bk = model.bk();
    let mut per_eigenvalue = Vec::new();
    for lambda in nonzero_laplacian_eigenvalues(&model.graph)? {
        let m = complex_closed_loop_embedding(&model.a, &bk, lambda);
        let verdict = hurwitz_verdict(&m)?;
        per_eigenvalue.push(EigenvalueCheck {
            lambda_re: lambda.re,
            lambda_im: lambda.im,
            max_real_part: verdict.abscissa,
            hurwitz: verdict.hurwitz,
            marginal: verdict.marginal,
        });
    }
    Ok(ConditionReport { holds: per_eigenvalue.iter().all(|c| c.hurwitz), per_eigenvalue })
}

/// `⋃ₛ λ(A + λₛ(L)BK)` as a multiset of `(N−1)n` values.
pub fn reference_closed_loop_spectrum(model: &SystemModel) -> Result<Spectrum, ModelError> {
    let bk = model.bk();
    let mut out = Vec::new();
    for lambda in nonzero_laplacian_eigenvalues(&model.graph)? {
        if lambda.im == 0.0 {
            out.extend(eigenvalues(&(model.a() + &bk.scale(lambda.re)))?.eigenvalues);
        } else if lambda.im > 0.0 {
            // the embedding also covers the conjugate partner
            out.extend(eigenvalues(&complex_closed_loop_embedding(&model.a, &bk, lambda))?.eigenvalues);
        }
    }
    Ok(Spectrum { eigenvalues: out })
}

pub fn check_stabilizable(a: &Mat, b: &Mat) -> Result<bool, ModelError> {
    Ok(matlib::is_stabilizable(a, b, tol::RANK)?)
}

/// Three-step synthesis: solve the CARE for `P`, take
/// `c = c_margin + 1 / min Re λₛ(L)`, return `K = −cBᵀP`.
pub fn design_gain(a: &Mat, b: &Mat, g: &DirectedGraph, c_margin: f64) -> Result<Mat, ModelError> {
    if !(c_margin > 0.0 && c_margin.is_finite()) {
        return Err(ModelError::Precondition(format!("c_margin must be positive, got {c_margin}")));
    }
    if !check_stabilizable(a, b)? {
        return Err(ModelError::NotStabilizable);
    }
    let lambdas = nonzero_laplacian_eigenvalues(g)?;
    let min_re = lambdas.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if min_re <= 0.0 {
        return Err(ModelError::Precondition(format!(
            "nonzero Laplacian eigenvalue with real part {min_re:.3e}"
        )));
    }
    let p = matlib::solve_care(a, b)?;
    let c = c_margin + 1.0 / min_re;
    let k = (&b.transpose() * &p).scale(-c);
    let model = SystemModel::new(a.clone(), b.clone(), k.clone(), g.clone())?;
    let report = check_consensus_condition(&model)?;
    if !report.holds {
        let worst = report.per_eigenvalue.iter().map(|c| c.max_real_part).fold(f64::MIN, f64::max);
        return Err(ModelError::DesignVerification(format!(
            "A + λBK not Hurwitz for some λ (worst abscissa {worst:.3e})"
        )));
    }
    Ok(k)
}

/// `0 < α < −max Re λ(Π)`.
pub fn validate_alpha(alpha: f64, pi_mat: &Mat) -> Result<bool, ModelError> {
    let verdict = hurwitz_verdict(pi_mat)?;
    if !verdict.hurwitz {
        return Err(ModelError::Precondition(format!(
            "Π is not Hurwitz (abscissa {:.3e}); the decay-rate bound is vacuous",
            verdict.abscissa
        )));
    }
    Ok(alpha > 0.0 && alpha < -verdict.abscissa)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbscissaReport {
    pub mu_pi: f64,
    pub mu_omega: Vec<f64>,
}

pub fn spectral_abscissa_report(clm: &ClosedLoopMatrices) -> Result<AbscissaReport, ModelError> {
    Ok(AbscissaReport {
        mu_pi: eigenvalues(&clm.pi_mat)?.abscissa(),
        mu_omega: clm.omega.iter().map(|m| Ok(eigenvalues(m)?.abscissa())).collect::<Result<_, ModelError>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot() -> Mat {
        Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap()
    }

    fn pair_graph() -> DirectedGraph {
        DirectedGraph::from_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap()
    }

    fn pair_model() -> SystemModel {
        SystemModel::new(
            rot(),
            Mat::column(&[1.0, 1.0]),
            Mat::from_rows(&[[-2.2, -1.1]]).unwrap(),
            pair_graph(),
        )
        .unwrap()
    }

    #[test]
    fn two_agent_omega_and_pi() {
        let m = pair_model();
        // coefficient d + a* - A* = 1 + 1 - 0 = 2
        let expected = m.a() + &m.bk().scale(2.0);
        for i in 0..2 {
            assert!((&build_omega(&m, i).unwrap() - &expected).max_abs() < 1e-15);
        }
        let clm = build_pi_w(&m).unwrap();
        assert!((&clm.pi_mat - &expected).max_abs() < 1e-15);
        assert_eq!(clm.w_mat.shape(), (2, 4));
    }

    #[test]
    fn zero_gain_decouples() {
        let m = pair_model().with_gain(Mat::zeros(1, 2)).unwrap();
        let clm = build_pi_w(&m).unwrap();
        assert_eq!(clm.pi_mat, m.a().clone());
        assert_eq!(clm.w_mat, Mat::zeros(2, 4));
        assert_eq!(clm.omega[0], m.a().clone());
        let report = check_consensus_condition(&m).unwrap();
        assert!(!report.holds);
        assert!(report.any_marginal());
    }

    #[test]
    fn omega_index_out_of_range() {
        assert!(matches!(build_omega(&pair_model(), 2), Err(ModelError::Graph(_))));
    }

    #[test]
    fn hurwitz_cases() {
        assert!(is_hurwitz(&Mat::identity(3).scale(-1.0)).unwrap());
        assert!(!is_hurwitz(&rot()).unwrap());
        assert!(hurwitz_verdict(&rot()).unwrap().marginal);
        assert!(is_hurwitz(&Mat::zeros(2, 3)).is_err());
    }

    #[test]
    fn scalar_gain_design() {
        let one = Mat::new(1, 1, vec![1.0]).unwrap();
        let zero = Mat::new(1, 1, vec![0.0]).unwrap();
        let k = design_gain(&zero, &one, &pair_graph(), 0.5).unwrap();
        // P = 1, c = 0.5 + 1/2
        assert!((k[(0, 0)] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn design_rejects_bad_inputs() {
        let g = pair_graph();
        assert_eq!(
            design_gain(&Mat::identity(2), &Mat::zeros(2, 1), &g, 0.5),
            Err(ModelError::NotStabilizable)
        );
        let disconnected = DirectedGraph::from_edges(2, &[]).unwrap();
        assert_eq!(
            design_gain(&rot(), &Mat::column(&[1.0, 1.0]), &disconnected, 0.5),
            Err(ModelError::NoSpanningTree)
        );
        assert!(design_gain(&rot(), &Mat::column(&[1.0, 1.0]), &g, 0.0).is_err());
    }

    #[test]
    fn alpha_bounds_are_strict() {
        let pi = Mat::identity(2).scale(-1.0);
        assert!(validate_alpha(0.5, &pi).unwrap());
        assert!(!validate_alpha(0.0, &pi).unwrap());
        assert!(!validate_alpha(1.0, &pi).unwrap());
        assert!(matches!(validate_alpha(0.1, &rot()), Err(ModelError::Precondition(_))));
    }

    #[test]
    fn abscissa_report_of_negative_identity() {
        let clm = ClosedLoopMatrices {
            omega: vec![Mat::identity(2).scale(-1.0)],
            pi_mat: Mat::identity(2).scale(-1.0),
            w_mat: Mat::zeros(2, 3),
        };
        let r = spectral_abscissa_report(&clm).unwrap();
        assert_eq!(r.mu_pi, -1.0);
        assert_eq!(r.mu_omega, vec![-1.0]);
    }

    #[test]
    fn model_dimension_checks() {
        let g = pair_graph();
        let b = Mat::column(&[1.0, 1.0]);
        assert!(SystemModel::new(rot(), b.clone(), Mat::zeros(2, 1), g.clone()).is_err());
        assert!(SystemModel::new(rot(), Mat::column(&[1.0]), Mat::zeros(1, 2), g.clone()).is_err());
        let single = DirectedGraph::from_edges(1, &[]).unwrap();
        assert_eq!(
            SystemModel::new(rot(), b, Mat::zeros(1, 2), single),
            Err(ModelError::TooFewAgents(1))
        );
    }
}
