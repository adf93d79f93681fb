// SPDX-License-Identifier: Apache-2.0

//! Weighted directed communication topology.
//!
//! `a_ij > 0` means agent `i` receives information from agent `j`. Agents are
//! indexed from 0 here; user-facing config and output are 1-based.

use std::collections::VecDeque;

use thiserror::Error;

use crate::matlib::Mat;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph needs at least one agent")]
    Empty,
    #[error("adjacency must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("self-loop on agent {} (a_ii must be 0)", .agent + 1)]
    SelfLoop { agent: usize },
    #[error("weight a_{}{} = {weight} must be finite and nonnegative", .row + 1, .col + 1)]
    BadWeight { row: usize, col: usize, weight: f64 },
    #[error("agent index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    weights: Mat,
}

impl DirectedGraph {
    pub fn from_weights(weights: Mat) -> Result<Self, GraphError> {
        let (rows, cols) = weights.shape();
        if rows != cols {
            return Err(GraphError::NotSquare { rows, cols });
        }
        for i in 0..rows {
            for j in 0..cols {
                let w = weights[(i, j)];
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(GraphError::BadWeight { row: i, col: j, weight: w });
                }
                if i == j && w != 0.0 {
                    return Err(GraphError::SelfLoop { agent: i });
                }
            }
        }
        Ok(DirectedGraph { weights })
    }

    /// Builds a graph from `(receiver, sender, weight)` triples, 0-based.
    /// Repeated edges overwrite earlier ones.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut w = Mat::zeros(n, n);
        for &(i, j, weight) in edges {
            for index in [i, j] {
                if index >= n {
                    return Err(GraphError::IndexOutOfRange { index, n });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop { agent: i });
            }
            if !(weight >= 0.0 && weight.is_finite()) {
                return Err(GraphError::BadWeight { row: i, col: j, weight });
            }
            w[(i, j)] = weight;
        }
        DirectedGraph::from_weights(w)
    }

    pub fn n_agents(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Mat {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// In-degree `l_ii = Σ_j a_ij`.
    pub fn degree(&self, i: usize) -> f64 {
        self.weights.row(i).iter().sum()
    }

    pub fn laplacian(&self) -> Mat {
        let n = self.n_agents();
        let mut l = self.weights.scale(-1.0);
        for i in 0..n {
            l[(i, i)] = self.degree(i);
        }
        l
    }

    fn check_index(&self, index: usize) -> Result<(), GraphError> {
        let n = self.n_agents();
        if index >= n {
            return Err(GraphError::IndexOutOfRange { index, n });
        }
        Ok(())
    }

    /// Agents `i` listens to: `{ j : a_ij > 0 }`, ascending.
    pub fn in_neighbors(&self, i: usize) -> Result<Vec<usize>, GraphError> {
        self.check_index(i)?;
        Ok((0..self.n_agents()).filter(|&j| self.weights[(i, j)] > 0.0).collect())
    }

    /// Agents that listen to `j`: `{ i : a_ij > 0 }`, ascending.
    pub fn out_neighbors(&self, j: usize) -> Result<Vec<usize>, GraphError> {
        self.check_index(j)?;
        Ok((0..self.n_agents()).filter(|&i| self.weights[(i, j)] > 0.0).collect())
    }

    /// Agents reachable from `root` along the information flow `j → i`
    /// (whenever `a_ij > 0`), including `root`.
    pub fn reachable_from(&self, root: usize) -> Vec<bool> {
        let n = self.n_agents();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(j) = queue.pop_front() {
            for i in 0..n {
                if !seen[i] && self.weights[(i, j)] > 0.0 {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        seen
    }

    /// Roots from which every agent is reachable.
    pub fn spanning_tree_roots(&self) -> Vec<usize> {
        (0..self.n_agents()).filter(|&r| self.reachable_from(r).iter().all(|&s| s)).collect()
    }

    pub fn has_spanning_tree(&self) -> bool {
        (0..self.n_agents()).any(|r| self.reachable_from(r).iter().all(|&s| s))
    }
}
