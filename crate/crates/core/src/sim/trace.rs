// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use crate::matlib::vec_norm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub agent: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trigger_counts: Vec<usize>,
    pub min_inter_event_interval: f64,
    pub final_consensus_error: f64,
    /// Largest `f = ‖e‖ − c₁e^{−αt}` seen at a firing instant, i.e. how far
    /// the sampled error overshot the threshold before the reset.
    pub max_trigger_overshoot: f64,
    pub diverged: bool,
    pub diverged_at: Option<f64>,
    pub steps: usize,
}

/// Time-indexed record of one run. Sample `k` is taken at `k·h` after all
/// events of that instant have been processed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub n_agents: usize,
    pub state_dim: usize,
    pub step: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    /// Per sample, per agent.
    pub states: Vec<Vec<Vec<f64>>>,
    pub error_norms: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
    pub events: Vec<Event>,
    pub consensus_error: Vec<f64>,
    pub summary: Summary,
}

impl SimTrace {
    pub fn events_of(&self, agent: usize) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().filter(move |e| e.agent == agent).map(|e| e.time)
    }

    /// Consensus error at the last sample not later than `t`.
    pub fn consensus_error_at(&self, t: f64) -> Option<f64> {
        let k = self.times.partition_point(|&s| s <= t + 0.5 * self.step);
        k.checked_sub(1).map(|k| self.consensus_error[k])
    }
}

/// Largest pairwise distance `max ‖xᵢ − xⱼ‖`.
pub fn consensus_error(states: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, xi) in states.iter().enumerate() {
        for xj in &states[i + 1..] {
            let d: Vec<f64> = xi.iter().zip(xj).map(|(a, b)| a - b).collect();
            worst = worst.max(vec_norm(&d));
        }
    }
    worst
}

/// Smallest gap between consecutive events of the same agent, per agent.
/// Agents with fewer than two events report `horizon`.
pub fn per_agent_min_gaps(events: &[Event], n_agents: usize, horizon: f64) -> Vec<f64> {
    let mut last: Vec<Option<f64>> = vec![None; n_agents];
    let mut gaps = vec![horizon; n_agents];
    for e in events {
        if let Some(prev) = last[e.agent] {
            gaps[e.agent] = gaps[e.agent].min(e.time - prev);
        }
        last[e.agent] = Some(e.time);
    }
    gaps
}
