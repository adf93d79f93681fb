// SPDX-License-Identifier: Apache-2.0

//! Fixed-step simulation of the closed loop.
//!
//! Each step of length `h`:
//!
//! 1. advance every agent's true state by RK4, recomputing
//!    `uᵢ = K Σ aᵢⱼ (x̂ᵢ − x̂ⱼ)` at the stage points of the predictors;
//! 2. advance every predictor (`x̂ᵢ` by the same RK4, `θ̂ᵢ` exactly);
//! 3. evaluate the triggering function of every agent at the step boundary;
//! 4. let the agents that fired broadcast, in ascending index, delivering each
//!    message to all out-neighbors before the next one is processed;
//! 5. record a sample.
//!
//! The continuous baseline replaces 2–4 with `uᵢ = K Σ aᵢⱼ (xᵢ − xⱼ)` on the
//! true states.

mod diagnostics;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diagnostics::{compare_baseline, zeno_diagnostics, BaselineComparison, ZenoReport};
pub use trace::{consensus_error, per_agent_min_gaps, Event, SimTrace, Summary};

use crate::matlib::vec_norm;
use crate::model::{build_pi_w, check_consensus_condition, validate_alpha, ModelError, SystemModel};
use crate::protocol::{
    consensus_input, on_receive, on_trigger, rk4_affine, threshold, trigger_check, AgentRuntime,
    BroadcastMessage, BroadcastPredictor, PredictorTables, ProtocolError, ThetaInit,
};

/// Any state norm above this ends the run as diverged.
pub const DIVERGENCE_NORM: f64 = 1e9;
/// Finite-horizon stand-in for asymptotic consensus.
pub const CONSENSUS_THRESHOLD: f64 = 0.05;
pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 20.0;
/// Replicated predictors must agree with the owner's to this tolerance.
pub const REPLICATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    EventTriggered,
    ContinuousBaseline,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("replicated predictor of agent {} diverged from the owner's at t = {time} (gap {gap:.3e})", .agent + 1)]
    ReplicationMismatch { agent: usize, time: f64, gap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: SystemModel,
    pub initial_states: Vec<Vec<f64>>,
    pub c1: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub step: f64,
    pub mode: Mode,
    /// Necessity experiment: skip the consensus-condition and α checks.
    pub expect_divergence: bool,
    /// Agent whose receiver-side reconstruction of its in-neighbors'
    /// predictors is checked against the owners' at every step.
    pub replica_check_agent: Option<usize>,
    pub theta_init: ThetaInit,
}

impl Scenario {
    pub fn new(
        model: SystemModel,
        initial_states: Vec<Vec<f64>>,
        c1: f64,
        alpha: f64,
        horizon: f64,
        step: f64,
        mode: Mode,
    ) -> Self {
        Scenario {
            model,
            initial_states,
            c1,
            alpha,
            horizon,
            step,
            mode,
            expect_divergence: false,
            replica_check_agent: Some(0),
            theta_init: ThetaInit::Global,
        }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Scenario { mode, ..self.clone() }
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |s: String| Err(SimError::InvalidScenario(s));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.horizon.is_finite() && self.step <= self.horizon) {
            return bad(format!("horizon {} must be at least one step {}", self.horizon, self.step));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return bad(format!("c1 must be positive, got {}", self.c1));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        let (n_agents, n) = (self.model.n_agents(), self.model.state_dim());
        if self.initial_states.len() != n_agents {
            return bad(format!("{} initial states for {n_agents} agents", self.initial_states.len()));
        }
        if let Some((i, x)) = self.initial_states.iter().enumerate().find(|(_, x)| x.len() != n) {
            return bad(format!("initial state of agent {} has length {}, expected {n}", i + 1, x.len()));
        }
        if self.initial_states.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite initial state".into());
        }
        if let Some(a) = self.replica_check_agent {
            if a >= n_agents {
                return bad(format!("replica check agent {} out of range", a + 1));
            }
        }
        if !self.model.graph().has_spanning_tree() {
            return Err(ModelError::NoSpanningTree.into());
        }
        if self.expect_divergence {
            return Ok(());
        }
        let report = check_consensus_condition(&self.model)?;
        if !report.holds {
            return Err(SimError::Assumption(
                "A + λ(L)BK is not Hurwitz for every nonzero Laplacian eigenvalue".into(),
            ));
        }
        if self.mode == Mode::EventTriggered {
            let clm = build_pi_w(&self.model)?;
            if !validate_alpha(self.alpha, &clm.pi_mat)? {
                return Err(SimError::Assumption(format!(
                    "alpha = {} is outside (0, -max Re λ(Π))",
                    self.alpha
                )));
            }
        }
        Ok(())
    }
}

/// Receiver-side reconstruction of the in-neighbors' `x̂` for one agent.
struct ReplicaCheck {
    agent: usize,
    replicas: Vec<BroadcastPredictor>,
}

impl ReplicaCheck {
    fn deliver(&mut self, msg: &BroadcastMessage) {
        if let Some(r) = self.replicas.iter_mut().find(|r| r.owner == msg.sender) {
            r.reset(msg);
        }
    }
}

struct Recorder {
    trace: SimTrace,
    c1: f64,
    alpha: f64,
}

impl Recorder {
    fn record(&mut self, t: f64, states: &[Vec<f64>], errors: Vec<f64>) {
        self.trace.times.push(t);
        self.trace.consensus_error.push(consensus_error(states));
        self.trace.states.push(states.to_vec());
        self.trace.error_norms.push(errors);
        self.trace.thresholds.push(threshold(t, self.c1, self.alpha));
    }
}

pub fn run(scenario: &Scenario) -> Result<SimTrace, SimError> {
    scenario.validate()?;
    let n_agents = scenario.model.n_agents();
    let mut rec = Recorder {
        trace: SimTrace {
            n_agents,
            state_dim: scenario.model.state_dim(),
            step: scenario.step,
            horizon: scenario.horizon,
            times: Vec::new(),
            states: Vec::new(),
            error_norms: Vec::new(),
            thresholds: Vec::new(),
            events: Vec::new(),
            consensus_error: Vec::new(),
            summary: Summary {
                trigger_counts: vec![0; n_agents],
                min_inter_event_interval: scenario.horizon,
                final_consensus_error: 0.0,
                max_trigger_overshoot: f64::NEG_INFINITY,
                diverged: false,
                diverged_at: None,
                steps: 0,
            },
        },
        c1: scenario.c1,
        alpha: scenario.alpha,
    };
    match scenario.mode {
        Mode::EventTriggered => run_event_triggered(scenario, &mut rec)?,
        Mode::ContinuousBaseline => run_continuous(scenario, &mut rec),
    }
    let mut trace = rec.trace;
    let gaps = per_agent_min_gaps(&trace.events, n_agents, scenario.horizon);
    trace.summary.min_inter_event_interval = gaps.iter().copied().fold(scenario.horizon, f64::min);
    trace.summary.final_consensus_error = *trace.consensus_error.last().expect("initial sample");
    trace.summary.steps = trace.times.len() - 1;
    if trace.summary.max_trigger_overshoot == f64::NEG_INFINITY {
        trace.summary.max_trigger_overshoot = 0.0;
    }
    Ok(trace)
}

fn diverged(states: &[Vec<f64>]) -> bool {
    states.iter().any(|x| !(vec_norm(x) <= DIVERGENCE_NORM))
}

fn rk4_true_states(model: &SystemModel, neighbors: &[Vec<usize>], x: &mut [Vec<f64>], h: f64, stages: &[Vec<Vec<f64>>; 4]) {
    for (i, xi) in x.iter_mut().enumerate() {
        let u = std::array::from_fn(|q| consensus_input(model, i, &neighbors[i], &stages[q]));
        *xi = rk4_affine(model.a(), model.b(), xi, h, &u).0;
    }
}

fn run_event_triggered(sc: &Scenario, rec: &mut Recorder) -> Result<(), SimError> {
    let model = &sc.model;
    let graph = model.graph();
    let n_agents = model.n_agents();
    let h = sc.step;
    let tables = PredictorTables::new(model, h)?;
    let neighbors: Vec<Vec<usize>> =
        (0..n_agents).map(|i| graph.in_neighbors(i).expect("index in range")).collect();
    let out: Vec<Vec<usize>> = (0..n_agents).map(|j| graph.out_neighbors(j).expect("index in range")).collect();

    let mut x = sc.initial_states.clone();
    let mut agents = (0..n_agents)
        .map(|i| AgentRuntime::new(model, i, &x, 0.0, sc.theta_init))
        .collect::<Result<Vec<_>, _>>()?;
    let mut replica = sc.replica_check_agent.map(|agent| ReplicaCheck { agent, replicas: Vec::new() });

    let broadcast = |agents: &mut [AgentRuntime],
                         replica: &mut Option<ReplicaCheck>,
                         x: &[Vec<f64>],
                         i: usize,
                         t: f64|
     -> Result<(), SimError> {
        let msg = on_trigger(&mut agents[i], &tables.omega[i], &x[i], t)?;
        for &k in &out[i] {
            on_receive(&mut agents[k], &tables.omega[k], &msg, &x[k])?;
            if let Some(rc) = replica.as_mut().filter(|rc| rc.agent == k) {
                if rc.replicas.iter().all(|r| r.owner != i) {
                    rc.replicas.push(BroadcastPredictor::from_message(&msg));
                } else {
                    rc.deliver(&msg);
                }
            }
        }
        Ok(())
    };
    let log_event = |rec: &mut Recorder, i: usize, t: f64| {
        rec.trace.events.push(Event { agent: i, time: t });
        rec.trace.summary.trigger_counts[i] += 1;
    };

    // every agent fires at the initial instant
    for i in 0..n_agents {
        broadcast(&mut agents, &mut replica, &x, i, 0.0)?;
        log_event(rec, i, 0.0);
    }
    rec.record(0.0, &x, vec![0.0; n_agents]);

    for s in 1..=sc.n_steps() {
        let t = s as f64 * h;
        let mut stages: [Vec<Vec<f64>>; 4] = Default::default();
        for rt in agents.iter_mut() {
            let pts = rt.broadcast.step(model, &tables, t);
            for (q, p) in pts.into_iter().enumerate() {
                stages[q].push(p);
            }
            rt.step_theta(&tables, t);
        }
        rk4_true_states(model, &neighbors, &mut x, h, &stages);

        if let Some(rc) = replica.as_mut() {
            for r in rc.replicas.iter_mut() {
                r.step(model, &tables, t);
                let owner = &agents[r.owner].broadcast;
                let gap = r.xhat.iter().zip(&owner.xhat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if gap > REPLICATION_TOL {
                    return Err(SimError::ReplicationMismatch { agent: r.owner, time: t, gap });
                }
            }
        }

        let checks: Vec<_> = agents
            .iter()
            .zip(&x)
            .map(|(rt, xi)| trigger_check(crate::protocol::error_norm(rt, xi), t, sc.c1, sc.alpha))
            .collect();
        for (i, check) in checks.iter().enumerate() {
            if check.fired {
                let over = &mut rec.trace.summary.max_trigger_overshoot;
                *over = over.max(check.f_value);
                broadcast(&mut agents, &mut replica, &x, i, t)?;
                log_event(rec, i, t);
            }
        }

        let errors = agents.iter().zip(&x).map(|(rt, xi)| crate::protocol::error_norm(rt, xi)).collect();
        rec.record(t, &x, errors);
        if diverged(&x) {
            rec.trace.summary.diverged = true;
            rec.trace.summary.diverged_at = Some(t);
            break;
        }
    }
    Ok(())
}

fn run_continuous(sc: &Scenario, rec: &mut Recorder) {
    let model = &sc.model;
    let n_agents = model.n_agents();
    let h = sc.step;
    let neighbors: Vec<Vec<usize>> =
        (0..n_agents).map(|i| model.graph().in_neighbors(i).expect("index in range")).collect();
    let mut x = sc.initial_states.clone();
    rec.record(0.0, &x, vec![0.0; n_agents]);

    let slope = |y: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n_agents)
            .map(|i| {
                let u = consensus_input(model, i, &neighbors[i], y);
                let ay = model.a().matvec(&y[i]).expect("state shape");
                let bu = model.b().matvec(&u).expect("input shape");
                ay.iter().zip(&bu).map(|(p, q)| p + q).collect()
            })
            .collect()
    };
    let axpy = |y: &[Vec<f64>], c: f64, k: &[Vec<f64>]| -> Vec<Vec<f64>> {
        y.iter().zip(k).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + c * q).collect()).collect()
    };

    for s in 1..=sc.n_steps() {
        let t = s as f64 * h;
        let k1 = slope(&x);
        let k2 = slope(&axpy(&x, 0.5 * h, &k1));
        let k3 = slope(&axpy(&x, 0.5 * h, &k2));
        let k4 = slope(&axpy(&x, h, &k3));
        for i in 0..n_agents {
            for d in 0..x[i].len() {
                x[i][d] += h / 6.0 * (k1[i][d] + 2.0 * k2[i][d] + 2.0 * k3[i][d] + k4[i][d]);
            }
        }
        rec.record(t, &x, vec![0.0; n_agents]);
        if diverged(&x) {
            rec.trace.summary.diverged = true;
            rec.trace.summary.diverged_at = Some(t);
            break;
        }
    }
}
