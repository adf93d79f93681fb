// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use super::{per_agent_min_gaps, run, Mode, Scenario, SimError, SimTrace, CONSENSUS_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZenoReport {
    /// Smallest gap between consecutive events of any single agent.
    pub min_gap: f64,
    pub per_agent_min_gap: Vec<f64>,
    pub event_totals: Vec<usize>,
}

pub fn zeno_diagnostics(trace: &SimTrace) -> ZenoReport {
    let per_agent_min_gap = per_agent_min_gaps(&trace.events, trace.n_agents, trace.horizon);
    ZenoReport {
        min_gap: per_agent_min_gap.iter().copied().fold(trace.horizon, f64::min),
        per_agent_min_gap,
        event_totals: trace.summary.trigger_counts.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineComparison {
    pub event_final_error: f64,
    pub baseline_final_error: f64,
    pub event_reaches_consensus: bool,
    pub baseline_reaches_consensus: bool,
    pub total_events: usize,
    /// Messages a sampled-continuous scheme would send over the same horizon
    /// at the integration step (one per agent per step).
    pub continuous_messages: usize,
}

/// Runs the scenario twice, event-triggered and with continuous exchange of
/// true states.
pub fn compare_baseline(scenario: &Scenario) -> Result<(BaselineComparison, SimTrace, SimTrace), SimError> {
    let event = run(&scenario.with_mode(Mode::EventTriggered))?;
    let baseline = run(&scenario.with_mode(Mode::ContinuousBaseline))?;
    let cmp = BaselineComparison {
        event_final_error: event.summary.final_consensus_error,
        baseline_final_error: baseline.summary.final_consensus_error,
        event_reaches_consensus: event.summary.final_consensus_error < CONSENSUS_THRESHOLD,
        baseline_reaches_consensus: baseline.summary.final_consensus_error < CONSENSUS_THRESHOLD,
        total_events: event.events.len(),
        continuous_messages: scenario.n_steps() * scenario.model.n_agents(),
    };
    Ok((cmp, event, baseline))
}
