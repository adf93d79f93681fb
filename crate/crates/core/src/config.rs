// SPDX-License-Identifier: Apache-2.0

//! TOML scenario configuration and built-in presets.
//!
//! ```toml
//! [system]
//! n = 2
//! m = 1
//! A = [[0.0, 1.0], [-1.0, 0.0]]
//! B = [[1.0], [1.0]]
//!
//! [gain]
//! mode = "explicit"          # or "auto"
//! K = [[-2.2, -1.1]]
//! # c_margin = 0.5           # auto only
//!
//! [graph]
//! agents = 3
//! edges = [{ from = 1, to = 2 }, { from = 2, to = 3, weight = 0.5 }]
//! # or: matrix = [[0, 0, 1], [1, 0, 0], [0, 1, 0]]   (row i lists a_ij)
//!
//! [trigger]
//! c1 = 0.6
//! alpha = 0.4
//!
//! [sim]
//! horizon = 20.0
//! step = 1e-3
//! mode = "event_triggered"   # or "continuous_baseline"
//! theta_init = "global"      # or "in_neighbors"
//! initial_states = [[0.4, 0.3], [0.5, 0.2], [0.6, 0.1]]
//!
//! [output]
//! dir = "out"
//! emit = ["trace_csv", "events_csv", "summary"]
//! ```
//!
//! Agent indices are 1-based throughout the file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DirectedGraph, GraphError};
use crate::matlib::Mat;
use crate::model::{design_gain, ModelError, SystemModel, DEFAULT_C_MARGIN};
use crate::protocol::ThetaInit;
use crate::sim::{Mode, Scenario, DEFAULT_HORIZON, DEFAULT_STEP};

pub const PRESET_SIX_AGENT: &str = "paper-sec5";
pub const PRESET_DIVERGENCE: &str = "divergence";
pub const PRESETS: [&str; 2] = [PRESET_SIX_AGENT, PRESET_DIVERGENCE];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("dimension mismatch in `{field}`: {detail}")]
    Dimension { field: &'static str, detail: String },
    #[error("invalid value for `{field}`: {detail}")]
    Invalid { field: &'static str, detail: String },
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("unknown preset `{0}` (available: paper-sec5, divergence)")]
    UnknownPreset(String),
}

impl ConfigError {
    /// Assumption failures are reported separately from malformed input.
    pub fn is_assumption(&self) -> bool {
        matches!(self, ConfigError::Assumption(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    TraceCsv,
    EventsCsv,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GainMode {
    Explicit,
    Auto { c_margin: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub gain_mode: GainMode,
    pub output_dir: PathBuf,
    pub emit: Vec<Emit>,
}

impl RunConfig {
    pub fn emits(&self, what: Emit) -> bool {
        self.emit.contains(&what)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: Option<RawSystem>,
    gain: Option<RawGain>,
    graph: Option<RawGraph>,
    trigger: Option<RawTrigger>,
    sim: Option<RawSim>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n: Option<usize>,
    m: Option<usize>,
    #[serde(rename = "A")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGain {
    mode: Option<String>,
    #[serde(rename = "K")]
    k: Option<Vec<Vec<f64>>>,
    c_margin: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    agents: Option<usize>,
    matrix: Option<Vec<Vec<f64>>>,
    edges: Option<Vec<RawEdge>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    from: usize,
    to: usize,
    weight: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrigger {
    c1: Option<f64>,
    alpha: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    horizon: Option<f64>,
    step: Option<f64>,
    mode: Option<Mode>,
    initial_states: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    expect_divergence: bool,
    #[serde(default)]
    theta_init: ThetaInit,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    emit: Option<Vec<Emit>>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn matrix(field: &'static str, rows: Vec<Vec<f64>>) -> Result<Mat, ConfigError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(ConfigError::Dimension { field, detail: "matrix is empty".into() });
    }
    let cols = rows[0].len();
    if let Some(r) = rows.iter().position(|r| r.len() != cols) {
        return Err(ConfigError::Dimension {
            field,
            detail: format!("row {} has {} entries, row 1 has {cols}", r + 1, rows[r].len()),
        });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ConfigError::Invalid { field, detail: "entries must be finite".into() });
    }
    Mat::from_rows(&rows).map_err(|e| ConfigError::Dimension { field, detail: e.to_string() })
}

fn expect_shape(field: &'static str, m: &Mat, shape: (usize, usize)) -> Result<(), ConfigError> {
    if m.shape() != shape {
        return Err(ConfigError::Dimension {
            field,
            detail: format!("got {}x{}, expected {}x{}", m.rows(), m.cols(), shape.0, shape.1),
        });
    }
    Ok(())
}

fn graph_error(field: &'static str, e: GraphError) -> ConfigError {
    ConfigError::Invalid { field, detail: e.to_string() }
}

fn model_error(field: &'static str, e: ModelError) -> ConfigError {
    match e {
        ModelError::NoSpanningTree | ModelError::NotStabilizable => ConfigError::Assumption(e.to_string()),
        ModelError::Dimension(detail) => ConfigError::Dimension { field, detail },
        other => ConfigError::Invalid { field, detail: other.to_string() },
    }
}

fn positive(field: &'static str, v: Option<f64>) -> Result<f64, ConfigError> {
    let v = v.ok_or(ConfigError::Missing(field))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(ConfigError::Invalid { field, detail: format!("must be positive and finite, got {v}") });
    }
    Ok(v)
}

fn build_graph(raw: RawGraph) -> Result<DirectedGraph, ConfigError> {
    match (raw.matrix, raw.edges) {
        (Some(_), Some(_)) => Err(ConfigError::Invalid {
            field: "graph",
            detail: "give either `matrix` or `edges`, not both".into(),
        }),
        (None, None) => Err(ConfigError::Missing("graph.matrix or graph.edges")),
        (Some(rows), None) => {
            let w = matrix("graph.matrix", rows)?;
            if let Some(n) = raw.agents {
                expect_shape("graph.matrix", &w, (n, n))?;
            }
            DirectedGraph::from_weights(w).map_err(|e| graph_error("graph.matrix", e))
        }
        (None, Some(edges)) => {
            let n = raw.agents.ok_or(ConfigError::Missing("graph.agents"))?;
            let mut triples = Vec::with_capacity(edges.len());
            for e in edges {
                for idx in [e.from, e.to] {
                    if idx == 0 || idx > n {
                        return Err(ConfigError::Invalid {
                            field: "graph.edges",
                            detail: format!("agent {idx} out of range 1..={n}"),
                        });
                    }
                }
                triples.push((e.to - 1, e.from - 1, e.weight.unwrap_or(1.0)));
            }
            DirectedGraph::from_edges(n, &triples).map_err(|e| graph_error("graph.edges", e))
        }
    }
}

/// Parses and validates a configuration document. Structural problems,
/// dimension mismatches and a graph without a spanning tree are rejected
/// here; the consensus condition and the α bound are checked when a run
/// starts, so that a failing gain can still be analyzed.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Syntax { line, column, message: e.message().to_string() }
    })?;

    let system = raw.system.ok_or(ConfigError::Missing("system"))?;
    let a = matrix("system.A", system.a.ok_or(ConfigError::Missing("system.A"))?)?;
    let b = matrix("system.B", system.b.ok_or(ConfigError::Missing("system.B"))?)?;
    let n = system.n.unwrap_or(a.rows());
    let m = system.m.unwrap_or(b.cols());
    expect_shape("system.A", &a, (n, n))?;
    expect_shape("system.B", &b, (n, m))?;

    let graph = build_graph(raw.graph.ok_or(ConfigError::Missing("graph"))?)?;
    if graph.n_agents() < 2 {
        return Err(ConfigError::Invalid { field: "graph", detail: "need at least 2 agents".into() });
    }
    if !graph.has_spanning_tree() {
        return Err(ConfigError::Assumption(ModelError::NoSpanningTree.to_string()));
    }

    let gain = raw.gain.ok_or(ConfigError::Missing("gain"))?;
    let auto = match gain.mode.as_deref() {
        None => gain.k.is_none(),
        Some("explicit") => false,
        Some("auto") => true,
        Some(other) => {
            return Err(ConfigError::Invalid {
                field: "gain.mode",
                detail: format!("`{other}` is not one of explicit, auto"),
            })
        }
    };
    let (k, gain_mode) = if auto {
        if gain.k.is_some() {
            return Err(ConfigError::Invalid { field: "gain", detail: "auto mode takes no explicit K".into() });
        }
        let c_margin = gain.c_margin.unwrap_or(DEFAULT_C_MARGIN);
        let k = design_gain(&a, &b, &graph, c_margin).map_err(|e| model_error("gain", e))?;
        (k, GainMode::Auto { c_margin })
    } else {
        if gain.c_margin.is_some() {
            return Err(ConfigError::Invalid { field: "gain.c_margin", detail: "only used in auto mode".into() });
        }
        let k = matrix("gain.K", gain.k.ok_or(ConfigError::Missing("gain.K"))?)?;
        expect_shape("gain.K", &k, (m, n))?;
        (k, GainMode::Explicit)
    };
    let model = SystemModel::new(a, b, k, graph).map_err(|e| model_error("system", e))?;

    let trigger = raw.trigger.ok_or(ConfigError::Missing("trigger"))?;
    let c1 = positive("trigger.c1", trigger.c1)?;
    let alpha = positive("trigger.alpha", trigger.alpha)?;

    let sim = raw.sim.ok_or(ConfigError::Missing("sim"))?;
    let horizon = positive("sim.horizon", sim.horizon.or(Some(DEFAULT_HORIZON)))?;
    let step = positive("sim.step", sim.step.or(Some(DEFAULT_STEP)))?;
    if step > horizon {
        return Err(ConfigError::Invalid {
            field: "sim.step",
            detail: format!("step {step} exceeds horizon {horizon}"),
        });
    }
    let initial_states = sim.initial_states.ok_or(ConfigError::Missing("sim.initial_states"))?;
    if initial_states.len() != model.n_agents() {
        return Err(ConfigError::Dimension {
            field: "sim.initial_states",
            detail: format!("{} states for {} agents", initial_states.len(), model.n_agents()),
        });
    }
    if let Some(i) = initial_states.iter().position(|x| x.len() != n) {
        return Err(ConfigError::Dimension {
            field: "sim.initial_states",
            detail: format!("state of agent {} has {} entries, expected {n}", i + 1, initial_states[i].len()),
        });
    }
    if initial_states.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ConfigError::Invalid { field: "sim.initial_states", detail: "entries must be finite".into() });
    }

    let mut scenario = Scenario::new(
        model,
        initial_states,
        c1,
        alpha,
        horizon,
        step,
        sim.mode.unwrap_or(Mode::EventTriggered),
    );
    scenario.expect_divergence = sim.expect_divergence;
    scenario.theta_init = sim.theta_init;

    Ok(RunConfig {
        scenario,
        gain_mode,
        output_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
        emit: raw.output.emit.unwrap_or_else(|| vec![Emit::TraceCsv, Emit::EventsCsv, Emit::Summary]),
    })
}

const SIX_AGENT_COMMON: &str = r#"
[system]
n = 2
m = 1
B = [[1.0], [1.0]]

[graph]
agents = 6
edges = [
    { from = 4, to = 1 }, { from = 5, to = 1 }, { from = 6, to = 1 },
    { from = 1, to = 2 },
    { from = 1, to = 3 }, { from = 2, to = 3 },
    { from = 1, to = 4 },
    { from = 4, to = 5 },
    { from = 5, to = 6 },
]

[trigger]
c1 = 0.6
alpha = 0.4
"#;

const SIX_AGENT_INITIAL: &str =
    "initial_states = [[0.4, 0.3], [0.5, 0.2], [0.6, 0.1], [0.7, 0.0], [0.8, -0.1], [0.4, -0.2]]";

/// TOML text of a built-in preset.
///
/// * `paper-sec5`: six harmonic oscillators on a directed graph with a fixed
///   gain, 20 s at `h = 1e-3`.
/// * `divergence`: the same graph and initial states with `K = 0` and an
///   unstable `A`, so disagreement grows until the divergence guard stops
///   the run.
pub fn preset_text(name: &str) -> Result<String, ConfigError> {
    let (a, k, extra) = match name {
        PRESET_SIX_AGENT => ("[[0.0, 1.0], [-1.0, 0.0]]", "[[-2.2, -1.1]]", ""),
        PRESET_DIVERGENCE => ("[[1.5, 1.0], [-1.0, 1.5]]", "[[0.0, 0.0]]", "expect_divergence = true\n"),
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    };
    Ok(format!(
        "{SIX_AGENT_COMMON}\n[gain]\nmode = \"explicit\"\nK = {k}\n\n[sim]\nhorizon = 20.0\nstep = 1e-3\n\
         mode = \"event_triggered\"\n{extra}{SIX_AGENT_INITIAL}\n\n[output]\ndir = \"out\"\n"
    )
    .replacen("[system]\n", &format!("[system]\nA = {a}\n"), 1))
}

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    parse_config(&preset_text(name)?)
}
