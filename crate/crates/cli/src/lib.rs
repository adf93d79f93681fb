// SPDX-License-Identifier: Apache-2.0

//! Batch front end: load a scenario, run one experiment, write CSV traces and
//! JSON reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use etconsensus::config::{self, ConfigError, Emit, GainMode, RunConfig};
use etconsensus::matlib::{care_residual, eigenvalues, solve_care, Mat};
use etconsensus::model::{
    build_pi_w, check_consensus_condition, design_gain, hurwitz_verdict, nonzero_laplacian_eigenvalues,
    reference_closed_loop_spectrum, validate_alpha, HurwitzVerdict, ModelError, SystemModel, ConditionReport,
    DEFAULT_C_MARGIN,
};
use etconsensus::sim::{self, compare_baseline, zeno_diagnostics, Mode, SimError, SimTrace, ZenoReport};
use etconsensus::Spectrum;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

pub const TRACE_FILE: &str = "trace.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SPECTRAL_FILE: &str = "spectral.json";
pub const GAIN_FILE: &str = "gain.json";
pub const BASELINE_TRACE_FILE: &str = "baseline_trace.csv";
pub const COMPARISON_FILE: &str = "comparison.json";

#[derive(Debug, Parser)]
#[command(name = "etconsensus", version, about = "Event-triggered consensus simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario: paper-sec5 or divergence.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory; overrides [output].dir.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Reserved. Runs are deterministic and ignore it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the scenario and write trace, events and summary.
    Run,
    /// Consensus-condition report, spectra of Π and every Ωᵢ, α check.
    Spectral,
    /// Synthesize a gain from A, B and the graph.
    DesignGain {
        /// Slack added to 1 / min Re λ(L); defaults to the config's or 0.5.
        #[arg(long)]
        c_margin: Option<f64>,
    },
    /// Run event-triggered and continuous protocols side by side.
    CompareBaseline,
}

#[derive(Debug)]
pub struct CliError {
    pub status: i32,
    pub message: String,
}

impl CliError {
    fn new(status: i32, message: impl Into<String>) -> Self {
        CliError { status, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let status = if e.is_assumption() { EXIT_ASSUMPTION } else { EXIT_CONFIG };
        CliError::new(status, e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::NoSpanningTree | ModelError::NotStabilizable | ModelError::DesignVerification(_) => {
                EXIT_ASSUMPTION
            }
            _ => EXIT_CONFIG,
        };
        CliError::new(status, e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let status = match &e {
            SimError::InvalidScenario(_) => EXIT_CONFIG,
            SimError::Assumption(_) | SimError::Model(ModelError::NoSpanningTree) => EXIT_ASSUMPTION,
            _ => EXIT_IO,
        };
        CliError::new(status, e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::new(EXIT_IO, format!("{e:#}"))
    }
}

pub fn load_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match (&global.config, &global.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::new(EXIT_CONFIG, format!("cannot read {}: {e}", path.display())))?;
            config::parse_config(&text)?
        }
        (None, Some(name)) => config::preset(name)?,
        (None, None) => return Err(CliError::new(EXIT_CONFIG, "one of --config or --preset is required")),
    };
    if let Some(out) = &global.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

/// Entry point shared by the binary and the tests. Returns the exit status.
pub fn execute(cli: &Cli) -> i32 {
    let result = load_config(&cli.global).and_then(|cfg| match &cli.command {
        Command::Run => run_command(&cfg).map(|o| o.status),
        Command::Spectral => spectral_command(&cfg).map(|r| if r.condition.holds { EXIT_OK } else { EXIT_ASSUMPTION }),
        Command::DesignGain { c_margin } => design_gain_command(&cfg, *c_margin).map(|_| EXIT_OK),
        Command::CompareBaseline => compare_baseline_command(&cfg).map(|_| EXIT_OK),
    });
    match result {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            e.status
        }
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `time, x{i}_{d}…, e{i}…, threshold`, 1-based indices, 17 significant
/// digits.
pub fn trace_csv(trace: &SimTrace) -> String {
    let mut s = String::from("time");
    for i in 1..=trace.n_agents {
        for d in 1..=trace.state_dim {
            let _ = write!(s, ",x{i}_{d}");
        }
    }
    for i in 1..=trace.n_agents {
        let _ = write!(s, ",e{i}");
    }
    s.push_str(",threshold\n");
    for k in 0..trace.times.len() {
        s.push_str(&fmt_num(trace.times[k]));
        for x in &trace.states[k] {
            for v in x {
                s.push(',');
                s.push_str(&fmt_num(*v));
            }
        }
        for e in &trace.error_norms[k] {
            s.push(',');
            s.push_str(&fmt_num(*e));
        }
        s.push(',');
        s.push_str(&fmt_num(trace.thresholds[k]));
        s.push('\n');
    }
    s
}

pub fn events_csv(trace: &SimTrace) -> String {
    let mut s = String::from("time,agent\n");
    for e in &trace.events {
        let _ = writeln!(s, "{},{}", fmt_num(e.time), e.agent + 1);
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub condition: ConditionReport,
    pub pi: HurwitzVerdict,
    pub alpha: f64,
    pub alpha_admissible: bool,
}

fn spectral_summary(model: &SystemModel, alpha: f64) -> Result<SpectralSummary, CliError> {
    let condition = check_consensus_condition(model)?;
    let clm = build_pi_w(model)?;
    let pi = hurwitz_verdict(&clm.pi_mat)?;
    let alpha_admissible = pi.hurwitz && validate_alpha(alpha, &clm.pi_mat)?;
    Ok(SpectralSummary { condition, pi, alpha, alpha_admissible })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub gain: Vec<Vec<f64>>,
    pub gain_mode: GainMode,
    pub trigger_counts: Vec<usize>,
    pub total_events: usize,
    pub final_consensus_error: f64,
    pub min_inter_event_interval: f64,
    pub max_trigger_overshoot: f64,
    pub diverged: bool,
    pub diverged_at: Option<f64>,
    pub steps: usize,
    pub step: f64,
    pub horizon: f64,
    pub zeno: ZenoReport,
    pub spectral: SpectralSummary,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: i32,
    pub trace: SimTrace,
    pub summary: RunSummary,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn run_command(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let sc = &cfg.scenario;
    let trace = sim::run(sc)?;
    let summary = RunSummary {
        mode: sc.mode,
        gain: sc.model.k().to_rows(),
        gain_mode: cfg.gain_mode.clone(),
        trigger_counts: trace.summary.trigger_counts.clone(),
        total_events: trace.events.len(),
        final_consensus_error: trace.summary.final_consensus_error,
        min_inter_event_interval: trace.summary.min_inter_event_interval,
        max_trigger_overshoot: trace.summary.max_trigger_overshoot,
        diverged: trace.summary.diverged,
        diverged_at: trace.summary.diverged_at,
        steps: trace.summary.steps,
        step: sc.step,
        horizon: sc.horizon,
        zeno: zeno_diagnostics(&trace),
        spectral: spectral_summary(&sc.model, sc.alpha)?,
    };
    let dir = &cfg.output_dir;
    if cfg.emits(Emit::TraceCsv) {
        write_file(dir, TRACE_FILE, &trace_csv(&trace))?;
    }
    if cfg.emits(Emit::EventsCsv) {
        write_file(dir, EVENTS_FILE, &events_csv(&trace))?;
    }
    if cfg.emits(Emit::Summary) {
        write_file(dir, SUMMARY_FILE, &to_json(&summary))?;
    }
    let status = if trace.summary.diverged {
        eprintln!(
            "diverged at t = {} (state norm above {:e})",
            trace.summary.diverged_at.unwrap_or(f64::NAN),
            sim::DIVERGENCE_NORM
        );
        EXIT_DIVERGED
    } else {
        println!(
            "events per agent {:?} (total {}), final consensus error {:.3e}",
            summary.trigger_counts, summary.total_events, summary.final_consensus_error
        );
        EXIT_OK
    };
    Ok(RunOutcome { status, trace, summary })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

fn listing(s: &Spectrum) -> Vec<ComplexValue> {
    s.sorted().into_iter().map(|z| ComplexValue { re: z.re, im: z.im }).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub condition: ConditionReport,
    pub laplacian_nonzero: Vec<ComplexValue>,
    pub reference: Vec<ComplexValue>,
    pub pi: Vec<ComplexValue>,
    pub pi_abscissa: f64,
    /// Per agent, 1-based order.
    pub omega: Vec<Vec<ComplexValue>>,
    pub omega_abscissa: Vec<f64>,
    /// Largest matching distance between the reference multiset and the
    /// spectrum of Π or any Ωᵢ.
    pub max_spectrum_mismatch: Option<f64>,
    pub alpha: f64,
    pub alpha_admissible: bool,
}

pub fn spectral_report(model: &SystemModel, alpha: f64) -> Result<SpectralReport, CliError> {
    let condition = check_consensus_condition(model)?;
    let clm = build_pi_w(model)?;
    let reference = reference_closed_loop_spectrum(model)?;
    let pi = eigenvalues(&clm.pi_mat).map_err(ModelError::from)?;
    let omega: Vec<Spectrum> = clm
        .omega
        .iter()
        .map(eigenvalues)
        .collect::<Result<_, _>>()
        .map_err(ModelError::from)?;
    let mut mismatch = pi.matching_distance(&reference);
    for s in &omega {
        mismatch = match (mismatch, s.matching_distance(&reference)) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
    }
    let pi_abscissa = pi.abscissa();
    let lambdas = nonzero_laplacian_eigenvalues(model.graph())?;
    Ok(SpectralReport {
        condition,
        laplacian_nonzero: lambdas.iter().map(|z| ComplexValue { re: z.re, im: z.im }).collect(),
        reference: listing(&reference),
        pi: listing(&pi),
        pi_abscissa,
        omega_abscissa: omega.iter().map(Spectrum::abscissa).collect(),
        omega: omega.iter().map(listing).collect(),
        max_spectrum_mismatch: mismatch,
        alpha,
        alpha_admissible: alpha > 0.0 && pi_abscissa < 0.0 && alpha < -pi_abscissa,
    })
}

pub fn spectral_command(cfg: &RunConfig) -> Result<SpectralReport, CliError> {
    let report = spectral_report(&cfg.scenario.model, cfg.scenario.alpha)?;
    write_file(&cfg.output_dir, SPECTRAL_FILE, &to_json(&report))?;
    println!(
        "consensus condition {}; max Re λ(Π) = {:.6}; alpha = {} {}",
        if report.condition.holds { "holds" } else { "FAILS" },
        report.pi_abscissa,
        report.alpha,
        if report.alpha_admissible { "admissible" } else { "not admissible" }
    );
    for c in &report.condition.per_eigenvalue {
        println!(
            "  λ = {:.6} {:+.6}i: max Re λ(A + λBK) = {:.6}",
            c.lambda_re, c.lambda_im, c.max_real_part
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct GainReport {
    pub k: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub c_margin: f64,
    pub care_residual: f64,
    pub a_minus_bbtp: HurwitzVerdict,
    pub condition: ConditionReport,
}

pub fn design_gain_command(cfg: &RunConfig, c_margin: Option<f64>) -> Result<GainReport, CliError> {
    let model = &cfg.scenario.model;
    let c_margin = c_margin.unwrap_or(match cfg.gain_mode {
        GainMode::Auto { c_margin } => c_margin,
        GainMode::Explicit => DEFAULT_C_MARGIN,
    });
    let (a, b) = (model.a(), model.b());
    let k = design_gain(a, b, model.graph(), c_margin)?;
    let p = solve_care(a, b).map_err(ModelError::from)?;
    let residual = care_residual(a, b, &p).norm_fro();
    let closed: Mat = a - &(&(b * &b.transpose()) * &p);
    let report = GainReport {
        condition: check_consensus_condition(&model.with_gain(k.clone())?)?,
        k: k.to_rows(),
        p: p.to_rows(),
        c_margin,
        care_residual: residual,
        a_minus_bbtp: hurwitz_verdict(&closed)?,
    };
    write_file(&cfg.output_dir, GAIN_FILE, &to_json(&report))?;
    println!("K = {:?} (CARE residual {:.2e})", report.k, report.care_residual);
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub event_final_error: f64,
    pub baseline_final_error: f64,
    pub event_reaches_consensus: bool,
    pub baseline_reaches_consensus: bool,
    pub consensus_threshold: f64,
    pub total_events: usize,
    pub trigger_counts: Vec<usize>,
    pub continuous_messages: usize,
}

pub fn compare_baseline_command(cfg: &RunConfig) -> Result<ComparisonReport, CliError> {
    let (cmp, event, baseline) = compare_baseline(&cfg.scenario)?;
    let report = ComparisonReport {
        event_final_error: cmp.event_final_error,
        baseline_final_error: cmp.baseline_final_error,
        event_reaches_consensus: cmp.event_reaches_consensus,
        baseline_reaches_consensus: cmp.baseline_reaches_consensus,
        consensus_threshold: sim::CONSENSUS_THRESHOLD,
        total_events: cmp.total_events,
        trigger_counts: event.summary.trigger_counts.clone(),
        continuous_messages: cmp.continuous_messages,
    };
    let dir = &cfg.output_dir;
    write_file(dir, TRACE_FILE, &trace_csv(&event))?;
    write_file(dir, EVENTS_FILE, &events_csv(&event))?;
    write_file(dir, BASELINE_TRACE_FILE, &trace_csv(&baseline))?;
    write_file(dir, COMPARISON_FILE, &to_json(&report))?;
    println!(
        "event-triggered: {} events, final error {:.3e}; continuous: {} messages, final error {:.3e}",
        report.total_events, report.event_final_error, report.continuous_messages, report.baseline_final_error
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use etconsensus::config::{preset, PRESET_SIX_AGENT};
    use etconsensus::sim::Scenario;

    fn short_run() -> SimTrace {
        let mut sc: Scenario = preset(PRESET_SIX_AGENT).unwrap().scenario;
        sc.horizon = 0.01;
        sim::run(&sc).unwrap()
    }

    #[test]
    fn trace_header_and_rows() {
        let tr = short_run();
        let csv = trace_csv(&tr);
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header.len(), 1 + 12 + 6 + 1);
        assert_eq!(header[1], "x1_1");
        assert_eq!(header[12], "x6_2");
        assert_eq!(header[13], "e1");
        assert_eq!(*header.last().unwrap(), "threshold");
        assert_eq!(lines.count(), tr.times.len());
    }

    #[test]
    fn values_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.2e-17, 6.02214076e23, 0.0] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn events_are_one_based() {
        let csv = events_csv(&short_run());
        let agents: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
        assert_eq!(agents, ["1", "2", "3", "4", "5", "6"]);
    }
}
