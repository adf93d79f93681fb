// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use etconsensus::graph::DirectedGraph;
use etconsensus::matlib::{is_stabilizable, Mat};
use etconsensus::model::{design_gain, SystemModel, DEFAULT_C_MARGIN};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Mat::new(rows, cols, data).unwrap()
}

/// Random digraph with a directed spanning tree: a random rooted tree plus
/// extra edges with probability `extra`. Weights in [0.5, 2] keep repeated
/// Laplacian eigenvalues (and defective Jordan blocks) unlikely.
pub fn random_spanning_tree_graph(rng: &mut impl Rng, n: usize, extra: f64) -> DirectedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut w = Mat::zeros(n, n);
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        w[(order[k], parent)] = rng.gen_range(0.5..2.0);
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && w[(i, j)] == 0.0 && rng.gen_bool(extra) {
                w[(i, j)] = rng.gen_range(0.5..2.0);
            }
        }
    }
    DirectedGraph::from_weights(w).unwrap()
}

pub fn random_stabilizable_pair(rng: &mut impl Rng, n: usize, m: usize) -> (Mat, Mat) {
    loop {
        let a = random_mat(rng, n, n, 1.5);
        let b = random_mat(rng, n, m, 1.0);
        if is_stabilizable(&a, &b, 1e-6).unwrap() {
            return (a, b);
        }
    }
}

/// N in 2..=6, n in 1..=3, gain from `design_gain`.
pub fn random_designed_model(rng: &mut impl Rng) -> SystemModel {
    let n_agents = rng.gen_range(2..=6);
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=n);
    let g = random_spanning_tree_graph(rng, n_agents, 0.3);
    let (a, b) = random_stabilizable_pair(rng, n, m);
    let k = design_gain(&a, &b, &g, DEFAULT_C_MARGIN).unwrap();
    SystemModel::new(a, b, k, g).unwrap()
}

pub fn six_agent_graph() -> DirectedGraph {
    let edges = [(1, 4), (1, 5), (1, 6), (2, 1), (3, 1), (3, 2), (4, 1), (5, 4), (6, 5)];
    let edges: Vec<_> = edges.iter().map(|&(i, j)| (i - 1, j - 1, 1.0)).collect();
    DirectedGraph::from_edges(6, &edges).unwrap()
}
