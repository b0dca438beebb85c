//! Monte Carlo simulation of both sensing scenarios and parameter sweeps
//! that pair every policy's analytic prediction with an empirical estimate.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::accuracy::{k_ms, k_mv, ScenarioConfig};
use crate::channel::{db_to_linear, decode_error_prob, sample_outcome, TransmissionOutcome};
use crate::error::{Error, Result};
use crate::gmm::{ClassLabel, GmmModel};
use crate::mc::{self, SimResult};
use crate::optimizer::{exact_bound, run_method, search_limit, Method, Scenario};

fn uniform_guess(num_classes: usize, rng: &mut mc::TrialRng) -> ClassLabel {
    ClassLabel(rng.random_range(0..num_classes))
}

fn check_model(model: &GmmModel, cfg: &ScenarioConfig) {
    assert_eq!(model.num_classes(), cfg.num_classes, "model and scenario disagree on the number of classes");
}

/// Multi-snapshot accuracy at packet length `packet_len`.
pub fn simulate_ms(model: &GmmModel, cfg: &ScenarioConfig, packet_len: u64, trials: u64, seed: u64) -> SimResult {
    simulate_ms_with_workers(model, cfg, packet_len, trials, seed, mc::default_workers())
}

pub fn simulate_ms_with_workers(
    model: &GmmModel,
    cfg: &ScenarioConfig,
    packet_len: u64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> SimResult {
    check_model(model, cfg);
    let l = model.num_classes();
    let k = k_ms(cfg, packet_len);
    let eps = decode_error_prob(&cfg.link, packet_len);
    let xi = cfg.link.activation_prob;
    mc::run_trials(
        trials,
        seed,
        workers,
        || vec![0.0; model.dim()],
        |acc, rng| {
            let label = ClassLabel(rng.random_range(0..l));
            if k == 0 {
                return uniform_guess(l, rng) == label;
            }
            acc.fill(0.0);
            for _ in 0..k {
                model.accumulate_sample(label, rng, acc);
            }
            let guess = match sample_outcome(xi, eps, rng) {
                TransmissionOutcome::Success => {
                    let scale = 1.0 / k as f64;
                    acc.iter_mut().for_each(|a| *a *= scale);
                    model.classify(acc)
                }
                _ => uniform_guess(l, rng),
            };
            guess == label
        },
    )
}

/// Multi-view accuracy at packet length `packet_len`.
pub fn simulate_mv(model: &GmmModel, cfg: &ScenarioConfig, packet_len: u64, trials: u64, seed: u64) -> SimResult {
    simulate_mv_with_workers(model, cfg, packet_len, trials, seed, mc::default_workers())
}

pub fn simulate_mv_with_workers(
    model: &GmmModel,
    cfg: &ScenarioConfig,
    packet_len: u64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> SimResult {
    check_model(model, cfg);
    let l = model.num_classes();
    let k = k_mv(cfg, packet_len);
    let eps = decode_error_prob(&cfg.link, packet_len);
    let xi = cfg.link.activation_prob;
    let dim = model.dim();
    mc::run_trials(
        trials,
        seed,
        workers,
        || (vec![0.0; dim], vec![0.0; dim]),
        |(acc, view), rng| {
            let label = ClassLabel(rng.random_range(0..l));
            acc.fill(0.0);
            let mut received = 0u64;
            for _ in 0..k {
                view.fill(0.0);
                model.accumulate_sample(label, rng, view);
                if sample_outcome(xi, eps, rng) == TransmissionOutcome::Success {
                    acc.iter_mut().zip(view.iter()).for_each(|(a, v)| *a += v);
                    received += 1;
                }
            }
            let guess = if received == 0 {
                uniform_guess(l, rng)
            } else {
                let scale = 1.0 / received as f64;
                acc.iter_mut().for_each(|a| *a *= scale);
                model.classify(acc)
            };
            guess == label
        },
    )
}

pub fn simulate(
    model: &GmmModel,
    cfg: &ScenarioConfig,
    scenario: Scenario,
    packet_len: u64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> SimResult {
    match scenario {
        Scenario::MultiSnapshot => simulate_ms_with_workers(model, cfg, packet_len, trials, seed, workers),
        Scenario::MultiView => simulate_mv_with_workers(model, cfg, packet_len, trials, seed, workers),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PacketLength,
    SnrDb,
    DeadlineS,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::PacketLength => "packet_length",
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::DeadlineS => "deadline_s",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "packet_length" => Ok(SweepVariable::PacketLength),
            "snr_db" => Ok(SweepVariable::SnrDb),
            "deadline_s" => Ok(SweepVariable::DeadlineS),
            other => Err(Error::InvalidConfig(format!("unknown sweep variable '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    InfeasibleDeadline,
    TargetUnreachable,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::InfeasibleDeadline => "infeasible_deadline",
            RowStatus::TargetUnreachable => "target_unreachable",
        }
    }
}

/// One (grid point, method) result. Fields that could not be computed for
/// an infeasible row are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_var: SweepVariable,
    pub sweep_value: f64,
    pub method: String,
    pub packet_len: Option<u64>,
    pub num_views: Option<u64>,
    pub epsilon: Option<f64>,
    pub rho: Option<f64>,
    pub analytic_accuracy: Option<f64>,
    pub empirical_accuracy: Option<f64>,
    pub ci_halfwidth_95: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    pub status: RowStatus,
}

/// Method label used for rows of a packet-length sweep.
pub const FIXED_METHOD: &str = "fixed";

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
}

fn status_of(err: &Error) -> Option<RowStatus> {
    match err {
        Error::InfeasibleDeadline(_) => Some(RowStatus::InfeasibleDeadline),
        Error::TargetUnreachable { .. } => Some(RowStatus::TargetUnreachable),
        _ => None,
    }
}

fn method_label(method: Method, scenario: Scenario) -> &'static str {
    match method {
        Method::UltraLoLaMs | Method::UltraLoLaMv => match scenario {
            Scenario::MultiSnapshot => Method::UltraLoLaMs.as_str(),
            Scenario::MultiView => Method::UltraLoLaMv.as_str(),
        },
        other => other.as_str(),
    }
}

/// Applies one grid value to the base configuration.
pub fn apply_sweep_value(base: &ScenarioConfig, variable: SweepVariable, value: f64) -> Result<ScenarioConfig> {
    let mut cfg = *base;
    match variable {
        SweepVariable::PacketLength => {}
        SweepVariable::SnrDb => cfg.link.snr = db_to_linear(value),
        SweepVariable::DeadlineS => cfg.deadline_s = value,
    }
    cfg.validate()?;
    Ok(cfg)
}

fn packet_length_value(value: f64) -> Result<u64> {
    if value >= 1.0 && value.fract() == 0.0 && value < u64::MAX as f64 {
        Ok(value as u64)
    } else {
        Err(Error::InvalidConfig(format!("packet length must be a positive integer, got {value}")))
    }
}

/// Runs every (grid point, method) pair. Infeasibility and unreachable
/// targets become row statuses; other errors abort the sweep.
pub fn sweep(model: &GmmModel, base: &ScenarioConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    if spec.grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("sweep grid must be strictly increasing".into()));
    }
    if spec.variable != SweepVariable::PacketLength && spec.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods selected".into()));
    }
    if spec.trials == 0 {
        return Err(Error::InvalidConfig("trials must be positive".into()));
    }
    let mut rows = Vec::new();
    for &value in &spec.grid {
        let blank = |method: &str, status: RowStatus| SweepRow {
            sweep_var: spec.variable,
            sweep_value: value,
            method: method.to_string(),
            packet_len: None,
            num_views: None,
            epsilon: None,
            rho: None,
            analytic_accuracy: None,
            empirical_accuracy: None,
            ci_halfwidth_95: None,
            trials: spec.trials,
            seed: spec.seed,
            status,
        };
        let labels: Vec<&str> = if spec.variable == SweepVariable::PacketLength {
            vec![FIXED_METHOD]
        } else {
            spec.methods.iter().map(|&m| method_label(m, spec.scenario)).collect()
        };
        let cfg = match apply_sweep_value(base, spec.variable, value) {
            Ok(cfg) => cfg,
            Err(e) => {
                let status = status_of(&e).ok_or(e)?;
                rows.extend(labels.iter().map(|m| blank(m, status)));
                continue;
            }
        };
        let chosen: Vec<Result<u64>> = if spec.variable == SweepVariable::PacketLength {
            let d = packet_length_value(value)?;
            let fits = search_limit(&cfg, spec.scenario).and_then(|hi| {
                if d <= hi {
                    Ok(d)
                } else {
                    Err(Error::InfeasibleDeadline(format!("packet length {d} exceeds the limit {hi}")))
                }
            });
            vec![fits]
        } else {
            spec.methods.iter().map(|&m| run_method(&cfg, spec.scenario, m).map(|p| p.packet_len)).collect()
        };
        for (label, d) in labels.iter().zip(chosen) {
            let d = match d {
                Ok(d) => d,
                Err(e) => {
                    let status = status_of(&e).ok_or(e)?;
                    rows.push(blank(label, status));
                    continue;
                }
            };
            let sim = simulate(model, &cfg, spec.scenario, d, spec.trials, spec.seed, spec.workers);
            let epsilon = decode_error_prob(&cfg.link, d);
            let views = match spec.scenario {
                Scenario::MultiSnapshot => k_ms(&cfg, d),
                Scenario::MultiView => k_mv(&cfg, d),
            };
            rows.push(SweepRow {
                packet_len: Some(d),
                num_views: Some(views),
                epsilon: Some(epsilon),
                rho: Some(cfg.link.activation_prob * (1.0 - epsilon)),
                analytic_accuracy: Some(exact_bound(&cfg, spec.scenario, d)),
                empirical_accuracy: Some(sim.accuracy),
                ci_halfwidth_95: Some(sim.ci_halfwidth_95),
                ..blank(label, RowStatus::Ok)
            });
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "sweep_var,sweep_value,method,packet_len,num_views,epsilon,rho,analytic_accuracy,empirical_accuracy,ci_halfwidth_95,trials,seed,status";

/// Formats a float with nine significant digits, `%.9g` style.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt_f(x: Option<f64>) -> String {
    x.map(format_sig9).unwrap_or_default()
}

fn opt_u(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        [
            self.sweep_var.as_str().to_string(),
            format_sig9(self.sweep_value),
            self.method.clone(),
            opt_u(self.packet_len),
            opt_u(self.num_views),
            opt_f(self.epsilon),
            opt_f(self.rho),
            opt_f(self.analytic_accuracy),
            opt_f(self.empirical_accuracy),
            opt_f(self.ci_halfwidth_95),
            self.trials.to_string(),
            self.seed.to_string(),
            self.status.as_str().to_string(),
        ]
        .join(",")
    }
}

/// Header plus one line per row, newline-terminated.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    for row in rows {
        writeln!(out, "{}", row.to_csv_line()).unwrap();
    }
    out
}
