// SPDX-License-Identifier: Apache-2.0

//! Per-agent event-triggered runtime.
//!
//! Agent `i` keeps two predictors:
//!
//! * `θ̂ᵢ`, its estimate of the stacked differences `xᵢ − xₚ` (self omitted,
//!   ascending `p`), propagated by `e^{Ωᵢ t}` and corrected whenever a
//!   neighbor broadcasts or `i` itself fires;
//! * `x̂ᵢ`, the broadcast-state predictor, which restarts from `xᵢ` at each of
//!   `i`'s own events and then follows `ẋ̂ = Ax̂ + Bûᵢ(t)` with
//!   `ûᵢ(t) = K(aᵢ*⊗I) e^{Ωᵢ(t − tₖ)} θ̂ᵢ(tₖ)`.
//!
//! `x̂ᵢ` depends only on what `i` broadcast at `tₖ`, so every out-neighbor can
//! rebuild it bit for bit from the message stream. That is what makes
//! `uᵢ = K Σ aᵢⱼ (x̂ᵢ − x̂ⱼ)` implementable without continuous communication.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matlib::{kron, mat_exp, vec_norm, Mat, MatError};
use crate::model::{build_omega, ModelError, SystemModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("time order violated: {what} ({later} < {earlier})")]
    TimeOrder { what: &'static str, earlier: f64, later: f64 },
    #[error("agent {} is not an in-neighbor of agent {}", .sender + 1, .receiver + 1)]
    NotInNeighbor { sender: usize, receiver: usize },
    #[error("no predictor available for in-neighbor {}", .0 + 1)]
    MissingNeighbor(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_order(what: &'static str, earlier: f64, later: f64) -> Result<(), ProtocolError> {
    if later < earlier {
        return Err(ProtocolError::TimeOrder { what, earlier, later });
    }
    Ok(())
}

/// `e^{Ω·dt} · rebase_value`.
pub fn predict_theta(rebase_value: &[f64], omega: &Mat, dt: f64) -> Result<Vec<f64>, ProtocolError> {
    if dt < 0.0 {
        return Err(ProtocolError::TimeOrder { what: "predictor horizon", earlier: 0.0, later: dt });
    }
    if rebase_value.len() != omega.cols() {
        return Err(ProtocolError::Dimension(format!(
            "predictor state of length {} for a {}x{} Ω",
            rebase_value.len(),
            omega.rows(),
            omega.cols()
        )));
    }
    if dt == 0.0 {
        return Ok(rebase_value.to_vec());
    }
    Ok(mat_exp(omega, dt)?.matvec(rebase_value)?)
}

/// Position of agent `p` inside agent `i`'s difference vector.
pub fn difference_slot(i: usize, p: usize) -> usize {
    debug_assert_ne!(i, p);
    if p < i {
        p
    } else {
        p - 1
    }
}

/// Model-derived matrices every agent needs: `Ωᵢ`, the input map
/// `Gᵢ = K(aᵢ*⊗Iₙ)` and, for a fixed integration step `h`, the transition
/// matrices `e^{Ωᵢh/2}` and `e^{Ωᵢh}`.
#[derive(Debug, Clone)]
pub struct PredictorTables {
    pub omega: Vec<Mat>,
    pub input_map: Vec<Mat>,
    pub half_step: Vec<Mat>,
    pub full_step: Vec<Mat>,
    pub step: f64,
}

impl PredictorTables {
    pub fn new(model: &SystemModel, step: f64) -> Result<Self, ProtocolError> {
        let n_agents = model.n_agents();
        let mut t = PredictorTables {
            omega: Vec::with_capacity(n_agents),
            input_map: Vec::with_capacity(n_agents),
            half_step: Vec::with_capacity(n_agents),
            full_step: Vec::with_capacity(n_agents),
            step,
        };
        for i in 0..n_agents {
            let omega = build_omega(model, i)?;
            let row = Mat::new(1, n_agents - 1, model.reduced_adjacency_row(i))?;
            t.input_map.push(model.k() * &kron(&row, &Mat::identity(model.state_dim())));
            t.half_step.push(mat_exp(&omega, 0.5 * step)?);
            t.full_step.push(mat_exp(&omega, step)?);
            t.omega.push(omega);
        }
        Ok(t)
    }
}

/// The broadcast-state predictor `x̂` of one agent together with the
/// difference predictor that drives its input estimate. Held by the owner and
/// by any receiver that wants to replicate it.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastPredictor {
    pub owner: usize,
    pub xhat: Vec<f64>,
    /// `e^{Ω(t − tₖ)} θ̂(tₖ)` at `time`.
    pub drive: Vec<f64>,
    /// Last broadcast instant `tₖ` and the broadcast difference vector.
    pub anchor_time: f64,
    pub anchor_drive: Vec<f64>,
    pub time: f64,
}

impl BroadcastPredictor {
    pub fn from_message(msg: &BroadcastMessage) -> Self {
        BroadcastPredictor {
            owner: msg.sender,
            xhat: msg.state.clone(),
            drive: msg.theta_hat.clone(),
            anchor_time: msg.time,
            anchor_drive: msg.theta_hat.clone(),
            time: msg.time,
        }
    }

    /// Restart from a broadcast.
    pub fn reset(&mut self, msg: &BroadcastMessage) {
        *self = BroadcastPredictor::from_message(msg);
    }

    /// One RK4 step of length `tables.step`, ending at `t_next`; returns the
    /// four stage points at which the RK4 slopes were evaluated.
    pub fn step(&mut self, model: &SystemModel, tables: &PredictorTables, t_next: f64) -> [Vec<f64>; 4] {
        let j = self.owner;
        let h = tables.step;
        let mid = tables.half_step[j].matvec(&self.drive).expect("table shape");
        let end = tables.full_step[j].matvec(&self.drive).expect("table shape");
        let g = &tables.input_map[j];
        let u_mid = g.matvec(&mid).expect("table shape");
        let inputs = [
            g.matvec(&self.drive).expect("table shape"),
            u_mid.clone(),
            u_mid,
            g.matvec(&end).expect("table shape"),
        ];
        let (next, stages) = rk4_affine(model.a(), model.b(), &self.xhat, h, &inputs);
        self.xhat = next;
        self.drive = end;
        self.time = t_next;
        stages
    }

    /// Exact-exponential variant of [`step`](Self::step) for an arbitrary
    /// interval, split into `substeps` RK4 steps.
    pub fn advance(
        &mut self,
        model: &SystemModel,
        omega: &Mat,
        input_map: &Mat,
        t1: f64,
        substeps: usize,
    ) -> Result<(), ProtocolError> {
        check_order("x̂ advance", self.time, t1)?;
        if substeps == 0 {
            return Err(ProtocolError::Dimension("substeps must be positive".into()));
        }
        let t0 = self.time;
        let h = (t1 - t0) / substeps as f64;
        for s in 0..substeps {
            let ts = t0 + s as f64 * h;
            let u = |t: f64| -> Result<Vec<f64>, ProtocolError> {
                let d = predict_theta(&self.anchor_drive, omega, t - self.anchor_time)?;
                Ok(input_map.matvec(&d)?)
            };
            let u_mid = u(ts + 0.5 * h)?;
            let inputs = [u(ts)?, u_mid.clone(), u_mid, u(ts + h)?];
            let (next, _) = rk4_affine(model.a(), model.b(), &self.xhat, h, &inputs);
            self.xhat = next;
        }
        self.drive = predict_theta(&self.anchor_drive, omega, t1 - self.anchor_time)?;
        self.time = t1;
        Ok(())
    }

    /// `ûᵢ` at the predictor's current time.
    pub fn input_estimate(&self, tables: &PredictorTables) -> Vec<f64> {
        tables.input_map[self.owner].matvec(&self.drive).expect("table shape")
    }
}

/// RK4 step of `ẏ = Ay + Bu` with the input supplied per stage (classical
/// tableau: `t`, `t + h/2`, `t + h/2`, `t + h`). Returns the new state and the
/// four stage points.
pub fn rk4_affine(a: &Mat, b: &Mat, y: &[f64], h: f64, u: &[Vec<f64>; 4]) -> (Vec<f64>, [Vec<f64>; 4]) {
    let f = |y: &[f64], u: &[f64]| -> Vec<f64> {
        let ay = a.matvec(y).expect("state shape");
        let bu = b.matvec(u).expect("input shape");
        ay.iter().zip(&bu).map(|(p, q)| p + q).collect()
    };
    let axpy = |y: &[f64], s: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(p, q)| p + s * q).collect() };
    let p1 = y.to_vec();
    let k1 = f(&p1, &u[0]);
    let p2 = axpy(y, 0.5 * h, &k1);
    let k2 = f(&p2, &u[1]);
    let p3 = axpy(y, 0.5 * h, &k2);
    let k3 = f(&p3, &u[2]);
    let p4 = axpy(y, h, &k3);
    let k4 = f(&p4, &u[3]);
    let next = (0..y.len())
        .map(|d| y[d] + h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]))
        .collect();
    (next, [p1, p2, p3, p4])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastMessage {
    pub sender: usize,
    pub time: f64,
    /// `xⱼ(tₖ)`.
    pub state: Vec<f64>,
    /// `θ̂ⱼ(tₖ)`.
    pub theta_hat: Vec<f64>,
}

/// What a receiver keeps about an in-neighbor's last broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEntry {
    pub theta_hat: Vec<f64>,
    pub state: Vec<f64>,
    pub time: f64,
}

/// How `θ̂ᵢ(0)` is filled in for agents `i` does not listen to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaInit {
    /// Exact initial differences to every agent, as if an initial
    /// network-wide exchange took place.
    #[default]
    Global,
    /// Exact differences to in-neighbors only; other slots start at zero.
    InNeighbors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRuntime {
    pub agent_id: usize,
    pub in_neighbors: Vec<usize>,
    pub broadcast: BroadcastPredictor,
    /// Live difference predictor `θ̂ᵢ` at `theta_time`.
    pub theta_hat: Vec<f64>,
    pub theta_time: f64,
    /// Most recent correction of `θ̂ᵢ`.
    pub rebase_time: f64,
    pub rebase_value: Vec<f64>,
    pub neighbor_cache: BTreeMap<usize, NeighborEntry>,
    pub last_trigger_time: f64,
    pub trigger_count: usize,
}

impl AgentRuntime {
    /// Runtime at `t0` with `θ̂ᵢ` initialized per `init`. No event is
    /// recorded yet; the engine fires every agent at `t0`.
    pub fn new(
        model: &SystemModel,
        agent_id: usize,
        initial_states: &[Vec<f64>],
        t0: f64,
        init: ThetaInit,
    ) -> Result<Self, ProtocolError> {
        let n_agents = model.n_agents();
        if initial_states.len() != n_agents {
            return Err(ProtocolError::Dimension(format!(
                "{} initial states for {n_agents} agents",
                initial_states.len()
            )));
        }
        let own = &initial_states[agent_id];
        let mut theta = Vec::with_capacity((n_agents - 1) * model.state_dim());
        for (p, xp) in initial_states.iter().enumerate() {
            if p != agent_id {
                if init == ThetaInit::InNeighbors && model.graph().weight(agent_id, p) == 0.0 {
                    theta.extend(std::iter::repeat(0.0).take(own.len()));
                } else {
                    theta.extend(own.iter().zip(xp).map(|(a, b)| a - b));
                }
            }
        }
        Ok(AgentRuntime {
            agent_id,
            in_neighbors: model.graph().in_neighbors(agent_id).map_err(ModelError::from)?,
            broadcast: BroadcastPredictor {
                owner: agent_id,
                xhat: own.clone(),
                drive: theta.clone(),
                anchor_time: t0,
                anchor_drive: theta.clone(),
                time: t0,
            },
            rebase_value: theta.clone(),
            theta_hat: theta,
            theta_time: t0,
            rebase_time: t0,
            neighbor_cache: BTreeMap::new(),
            last_trigger_time: t0,
            trigger_count: 0,
        })
    }

    /// Propagate `θ̂ᵢ` to `t` with the exact exponential (no-op when already
    /// there).
    pub fn sync_theta(&mut self, omega: &Mat, t: f64) -> Result<(), ProtocolError> {
        check_order("θ̂ propagation", self.theta_time, t)?;
        if t > self.theta_time {
            self.theta_hat = predict_theta(&self.theta_hat, omega, t - self.theta_time)?;
            self.theta_time = t;
        }
        Ok(())
    }

    /// Fixed-step propagation of `θ̂ᵢ` to `t_next` using the tabulated
    /// transition matrix.
    pub fn step_theta(&mut self, tables: &PredictorTables, t_next: f64) {
        self.theta_hat = tables.full_step[self.agent_id].matvec(&self.theta_hat).expect("table shape");
        self.theta_time = t_next;
    }

    fn rebase(&mut self, t: f64) {
        self.rebase_time = t;
        self.rebase_value = self.theta_hat.clone();
    }
}

/// `ûᵢ(t) = K(aᵢ*⊗I) e^{Ωᵢ(t − tₖᵢ)} θ̂ᵢ(tₖᵢ)` from the agent's own last broadcast.
pub fn estimate_control_self(runtime: &AgentRuntime, model: &SystemModel, t: f64) -> Result<Vec<f64>, ProtocolError> {
    let i = runtime.agent_id;
    let bp = &runtime.broadcast;
    check_order("input estimate", bp.anchor_time, t)?;
    estimate_from(model, i, &bp.anchor_drive, t - bp.anchor_time)
}

/// `ûⱼ(t) = K(aⱼ*⊗I) e^{Ωⱼ(t − tₖⱼ)} θ̂ⱼ(tₖⱼ)` from a cached broadcast.
pub fn estimate_control_neighbor(
    entry: &NeighborEntry,
    neighbor: usize,
    model: &SystemModel,
    t: f64,
) -> Result<Vec<f64>, ProtocolError> {
    check_order("input estimate", entry.time, t)?;
    estimate_from(model, neighbor, &entry.theta_hat, t - entry.time)
}

fn estimate_from(model: &SystemModel, agent: usize, theta: &[f64], dt: f64) -> Result<Vec<f64>, ProtocolError> {
    let omega = build_omega(model, agent)?;
    let predicted = predict_theta(theta, &omega, dt)?;
    let row = Mat::new(1, model.n_agents() - 1, model.reduced_adjacency_row(agent))?;
    let map = model.k() * &kron(&row, &Mat::identity(model.state_dim()));
    Ok(map.matvec(&predicted)?)
}

/// Advance `x̂ᵢ` from `t0` to `t1` by RK4, sampling `ûᵢ` exactly at the stage
/// times.
pub fn advance_xhat(
    runtime: &mut AgentRuntime,
    model: &SystemModel,
    t0: f64,
    t1: f64,
    substeps: usize,
) -> Result<(), ProtocolError> {
    check_order("x̂ advance start", runtime.broadcast.time, t0)?;
    check_order("x̂ advance end", t0, t1)?;
    let i = runtime.agent_id;
    let omega = build_omega(model, i)?;
    let row = Mat::new(1, model.n_agents() - 1, model.reduced_adjacency_row(i))?;
    let map = model.k() * &kron(&row, &Mat::identity(model.state_dim()));
    if t0 > runtime.broadcast.time {
        runtime.broadcast.advance(model, &omega, &map, t0, substeps)?;
    }
    runtime.broadcast.advance(model, &omega, &map, t1, substeps)
}

/// `eᵢ(t) = x̂ᵢ(t) − xᵢ(t)`.
pub fn measurement_error(runtime: &AgentRuntime, true_state: &[f64]) -> Vec<f64> {
    runtime.broadcast.xhat.iter().zip(true_state).map(|(a, b)| a - b).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerCheck {
    pub fired: bool,
    pub f_value: f64,
}

/// `f = ‖e‖ − c₁e^{−αt}`; fires on `f ≥ 0`.
pub fn trigger_check(error_norm: f64, t: f64, c1: f64, alpha: f64) -> TriggerCheck {
    let f_value = error_norm - threshold(t, c1, alpha);
    TriggerCheck { fired: f_value >= 0.0, f_value }
}

pub fn threshold(t: f64, c1: f64, alpha: f64) -> f64 {
    c1 * (-alpha * t).exp()
}

/// Agent fires at `t`: reset `x̂ᵢ` to the measured state, rebase `θ̂ᵢ`, and
/// build the broadcast.
pub fn on_trigger(
    runtime: &mut AgentRuntime,
    omega: &Mat,
    true_state: &[f64],
    t: f64,
) -> Result<BroadcastMessage, ProtocolError> {
    check_order("trigger", runtime.last_trigger_time, t)?;
    runtime.sync_theta(omega, t)?;
    runtime.rebase(t);
    let msg = BroadcastMessage {
        sender: runtime.agent_id,
        time: t,
        state: true_state.to_vec(),
        theta_hat: runtime.theta_hat.clone(),
    };
    runtime.broadcast.reset(&msg);
    runtime.last_trigger_time = t;
    runtime.trigger_count += 1;
    Ok(msg)
}

/// Receiver side: overwrite the sender's slot of `θ̂ᵢ` with the measured
/// difference `xᵢ(tₖⱼ) − xⱼ(tₖⱼ)` and cache the message.
pub fn on_receive(
    runtime: &mut AgentRuntime,
    omega: &Mat,
    msg: &BroadcastMessage,
    own_state_at_msg_time: &[f64],
) -> Result<(), ProtocolError> {
    let i = runtime.agent_id;
    if !runtime.in_neighbors.contains(&msg.sender) {
        return Err(ProtocolError::NotInNeighbor { sender: msg.sender, receiver: i });
    }
    if let Some(prev) = runtime.neighbor_cache.get(&msg.sender) {
        check_order("message time", prev.time, msg.time)?;
    }
    let n = own_state_at_msg_time.len();
    if msg.state.len() != n {
        return Err(ProtocolError::Dimension("message state length".into()));
    }
    runtime.sync_theta(omega, msg.time)?;
    let slot = difference_slot(i, msg.sender) * n;
    for d in 0..n {
        runtime.theta_hat[slot + d] = own_state_at_msg_time[d] - msg.state[d];
    }
    runtime.rebase(msg.time);
    runtime.neighbor_cache.insert(
        msg.sender,
        NeighborEntry { theta_hat: msg.theta_hat.clone(), state: msg.state.clone(), time: msg.time },
    );
    Ok(())
}

/// `uᵢ = K Σⱼ aᵢⱼ (x̂ᵢ − x̂ⱼ)`.
pub fn control_input(
    runtime: &AgentRuntime,
    model: &SystemModel,
    neighbor_xhats: &BTreeMap<usize, Vec<f64>>,
) -> Result<Vec<f64>, ProtocolError> {
    let i = runtime.agent_id;
    let mut acc = vec![0.0; model.state_dim()];
    for &j in &runtime.in_neighbors {
        let xj = neighbor_xhats.get(&j).ok_or(ProtocolError::MissingNeighbor(j))?;
        let w = model.graph().weight(i, j);
        for d in 0..acc.len() {
            acc[d] += w * (runtime.broadcast.xhat[d] - xj[d]);
        }
    }
    Ok(model.k().matvec(&acc)?)
}

/// `K Σⱼ aᵢⱼ (yᵢ − yⱼ)` over a full set of per-agent vectors.
pub fn consensus_input(model: &SystemModel, i: usize, neighbors: &[usize], y: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; model.state_dim()];
    for &j in neighbors {
        let w = model.graph().weight(i, j);
        for (d, a) in acc.iter_mut().enumerate() {
            *a += w * (y[i][d] - y[j][d]);
        }
    }
    model.k().matvec(&acc).expect("gain shape")
}

pub fn error_norm(runtime: &AgentRuntime, true_state: &[f64]) -> f64 {
    vec_norm(&measurement_error(runtime, true_state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedGraph;

    fn rot() -> Mat {
        Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap()
    }

    fn model_with(a: Mat, k: Mat) -> SystemModel {
        let g = DirectedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 0.5)]).unwrap();
        SystemModel::new(a, Mat::column(&[1.0, 1.0]), k, g).unwrap()
    }

    fn default_model() -> SystemModel {
        model_with(rot(), Mat::from_rows(&[[-2.2, -1.1]]).unwrap())
    }

    fn states() -> Vec<Vec<f64>> {
        vec![vec![0.4, 0.3], vec![0.5, 0.2], vec![-0.1, 0.7]]
    }

    #[test]
    fn predict_theta_trivial_cases() {
        let omega = build_omega(&default_model(), 0).unwrap();
        let v = vec![0.1, -0.2, 0.3, 0.4];
        assert_eq!(predict_theta(&v, &omega, 0.0).unwrap(), v);
        assert_eq!(predict_theta(&[0.0; 4], &omega, 1.3).unwrap(), vec![0.0; 4]);
        assert!(matches!(predict_theta(&v, &omega, -0.1), Err(ProtocolError::TimeOrder { .. })));
        assert!(predict_theta(&v[..3], &omega, 0.1).is_err());
    }

    #[test]
    fn difference_vector_ordering() {
        let rt = AgentRuntime::new(&default_model(), 1, &states(), 0.0, ThetaInit::Global).unwrap();
        // agent 2 (index 1): [x2 - x1, x2 - x3]
        let expected = [0.1, -0.1, 0.6, -0.5];
        for (a, b) in rt.theta_hat.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(difference_slot(1, 0), 0);
        assert_eq!(difference_slot(1, 2), 1);
    }

    #[test]
    fn zero_inputs_when_theta_or_gain_vanish() {
        let m = default_model();
        let same = vec![vec![0.3, 0.3]; 3];
        let rt = AgentRuntime::new(&m, 0, &same, 0.0, ThetaInit::Global).unwrap();
        assert!(estimate_control_self(&rt, &m, 0.7).unwrap().iter().all(|v| *v == 0.0));
        let m0 = model_with(rot(), Mat::zeros(1, 2));
        let rt = AgentRuntime::new(&m0, 0, &states(), 0.0, ThetaInit::Global).unwrap();
        assert!(estimate_control_self(&rt, &m0, 0.7).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn estimate_at_anchor_uses_no_exponential() {
        let m = default_model();
        let rt = AgentRuntime::new(&m, 0, &states(), 0.0, ThetaInit::Global).unwrap();
        // u_1 = K Σ a_1j (x_1 - x_j) with a_12 = 1
        let x = states();
        let direct = m.k().matvec(&[x[0][0] - x[1][0], x[0][1] - x[1][1]]).unwrap();
        let est = estimate_control_self(&rt, &m, 0.0).unwrap();
        assert!((est[0] - direct[0]).abs() < 1e-15);
        assert!(matches!(estimate_control_self(&rt, &m, -1.0), Err(ProtocolError::TimeOrder { .. })));
    }

    #[test]
    fn xhat_constant_without_dynamics() {
        let m = model_with(Mat::zeros(2, 2), Mat::zeros(1, 2));
        let mut rt = AgentRuntime::new(&m, 0, &states(), 0.0, ThetaInit::Global).unwrap();
        advance_xhat(&mut rt, &m, 0.0, 3.0, 10).unwrap();
        assert_eq!(rt.broadcast.xhat, states()[0]);
    }

    #[test]
    fn xhat_quarter_turn() {
        let m = model_with(rot(), Mat::zeros(1, 2));
        let mut rt = AgentRuntime::new(&m, 0, &states(), 0.0, ThetaInit::Global).unwrap();
        let t1 = std::f64::consts::FRAC_PI_2;
        advance_xhat(&mut rt, &m, 0.0, t1, 2000).unwrap();
        // e^{A t} with A the rotation generator maps (x, y) to (y, -x) at t = π/2
        let x0 = &states()[0];
        assert!((rt.broadcast.xhat[0] - x0[1]).abs() < 1e-8);
        assert!((rt.broadcast.xhat[1] + x0[0]).abs() < 1e-8);
        assert!(advance_xhat(&mut rt, &m, 0.5, 0.2, 1).is_err());
    }

    #[test]
    fn trigger_function_values() {
        let c = trigger_check(0.0, 0.0, 0.6, 0.4);
        assert!(!c.fired);
        assert!((c.f_value + 0.6).abs() < 1e-15);
        let t = 1.7;
        assert!(trigger_check(threshold(t, 0.6, 0.4), t, 0.6, 0.4).fired);
        let c = trigger_check(0.7, 0.0, 0.6, 0.4);
        assert!(c.fired && (c.f_value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn trigger_resets_error_and_counts() {
        let m = default_model();
        let tables = PredictorTables::new(&m, 1e-2).unwrap();
        let mut rt = AgentRuntime::new(&m, 0, &states(), 0.0, ThetaInit::Global).unwrap();
        for s in 1..=10 {
            let t = s as f64 * tables.step;
            rt.broadcast.step(&m, &tables, t);
            rt.step_theta(&tables, t);
        }
        let t = rt.theta_time;
        let x = vec![0.9, -0.3];
        assert!(error_norm(&rt, &x) > 0.0);
        let msg = on_trigger(&mut rt, &tables.omega[0], &x, t).unwrap();
        assert_eq!(measurement_error(&rt, &x), vec![0.0, 0.0]);
        assert_eq!(msg.time, t);
        assert_eq!(msg.state, x);
        assert_eq!(msg.theta_hat, rt.theta_hat);
        assert_eq!(rt.trigger_count, 1);
        assert_eq!(rt.rebase_time, t);
        let f = trigger_check(error_norm(&rt, &x), t, 0.6, 0.4);
        assert_eq!(f.f_value, -threshold(t, 0.6, 0.4));
        on_trigger(&mut rt, &tables.omega[0], &x, t).unwrap();
        assert_eq!(rt.trigger_count, 2);
    }

    #[test]
    fn receive_overwrites_sender_slot() {
        let m = default_model();
        let omega = build_omega(&m, 0).unwrap();
        let mut rt = AgentRuntime::new(&m, 0, &states(), 0.0, ThetaInit::Global).unwrap();
        let msg = BroadcastMessage { sender: 1, time: 0.25, state: vec![1.0, 2.0], theta_hat: vec![0.0; 4] };
        let own = vec![0.5, 0.5];
        on_receive(&mut rt, &omega, &msg, &own).unwrap();
        assert_eq!(&rt.theta_hat[0..2], &[-0.5, -1.5]);
        assert_eq!(rt.rebase_time, 0.25);
        assert_eq!(rt.neighbor_cache[&1].time, 0.25);
        // stale message
        let old = BroadcastMessage { time: 0.1, ..msg.clone() };
        assert!(matches!(on_receive(&mut rt, &omega, &old, &own), Err(ProtocolError::TimeOrder { .. })));
        // agent 3 is not an in-neighbor of agent 1
        let foreign = BroadcastMessage { sender: 2, ..msg };
        assert!(matches!(
            on_receive(&mut rt, &omega, &foreign, &own),
            Err(ProtocolError::NotInNeighbor { sender: 2, receiver: 0 })
        ));
    }

    #[test]
    fn control_input_cases() {
        let m = default_model();
        let rt = AgentRuntime::new(&m, 0, &states(), 0.0, ThetaInit::Global).unwrap();
        let mut xh = BTreeMap::new();
        xh.insert(1, rt.broadcast.xhat.clone());
        assert_eq!(control_input(&rt, &m, &xh).unwrap(), vec![0.0]);
        xh.insert(1, vec![0.0, 0.0]);
        let u = control_input(&rt, &m, &xh).unwrap();
        let want = m.k().matvec(&states()[0]).unwrap();
        assert_eq!(u, want);
        assert_eq!(control_input(&rt, &m, &BTreeMap::new()), Err(ProtocolError::MissingNeighbor(1)));
    }

    #[test]
    fn replica_matches_owner_bitwise() {
        let m = default_model();
        let tables = PredictorTables::new(&m, 1e-3).unwrap();
        let mut rt = AgentRuntime::new(&m, 2, &states(), 0.0, ThetaInit::Global).unwrap();
        let msg = on_trigger(&mut rt, &tables.omega[2], &states()[2], 0.0).unwrap();
        let mut replica = BroadcastPredictor::from_message(&msg);
        for s in 1..=500 {
            let t = s as f64 * tables.step;
            rt.broadcast.step(&m, &tables, t);
            replica.step(&m, &tables, t);
        }
        assert_eq!(replica, rt.broadcast);
    }
}
