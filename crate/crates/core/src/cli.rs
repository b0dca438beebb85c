//! Command-line front end: JSON experiment configs in, JSON or CSV out.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::accuracy::ScenarioConfig;
use crate::channel::{db_to_linear, decode_error_prob, success_prob, LinkConfig};
use crate::error::Error;
use crate::gmm::GmmModel;
use crate::mc;
use crate::optimizer::{
    brute_force, lookup_table_optimize, optimize, search_limit, shannon_baseline, urllc_baseline, AccuracyTable,
    Method, Scenario, URLLC_TARGET,
};
use crate::simulator::{rows_to_csv, simulate, sweep, SweepSpec, SweepVariable};

const DEFAULT_PRESET: &str = include_str!("../configs/default.json");
const BINARY_PRESET: &str = include_str!("../configs/binary.json");

fn default_eta() -> f64 {
    crate::accuracy::DEFAULT_ETA
}

/// Experiment description as read from JSON. SNR is in dB here and
/// converted once when building the [`ScenarioConfig`].
///
/// The classifier comes from `model` if present, else from a synthetic
/// model with the given `variance`, else from an equidistant model with
/// minimum gain `g_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub snr_db: f64,
    pub bandwidth_hz: f64,
    pub deadline_s: f64,
    pub sensing_time_s: f64,
    pub xi_a: f64,
    pub n_features: u32,
    pub q_bits: u32,
    pub n_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<GmmModel>,
    #[serde(default = "default_eta")]
    pub eta: f64,
}

const MODEL_KEYS: [&str; 3] = ["model", "variance", "g_min"];

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        match name {
            "default" => Self::from_json(DEFAULT_PRESET),
            "binary" => Self::from_json(BINARY_PRESET),
            other => Err(CliError::Config(format!("unknown preset '{other}' (expected default or binary)"))),
        }
    }

    /// Applies `key=value` overrides. Values are parsed as JSON, falling
    /// back to a plain string. Setting one of `model`, `variance`, `g_min`
    /// drops the others unless they are set too.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, CliError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut map = match serde_json::to_value(self).expect("config serializes") {
            Value::Object(m) => m,
            _ => unreachable!("config is a JSON object"),
        };
        let mut pairs = Vec::new();
        for item in overrides {
            let (key, raw) =
                item.split_once('=').ok_or_else(|| CliError::Config(format!("override '{item}' is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            pairs.push((key.trim().to_string(), value));
        }
        let touched: Vec<&str> = MODEL_KEYS.into_iter().filter(|k| pairs.iter().any(|(p, _)| p == k)).collect();
        if !touched.is_empty() {
            for k in MODEL_KEYS {
                if !touched.contains(&k) {
                    map.remove(k);
                }
            }
        }
        for (k, v) in pairs {
            map.insert(k, v);
        }
        serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Config(format!("invalid override: {e}")))
    }

    pub fn link(&self) -> Result<LinkConfig, Error> {
        LinkConfig::new(db_to_linear(self.snr_db), self.xi_a, self.bandwidth_hz, self.q_bits, self.n_features)
    }

    pub fn gmm_model(&self) -> Result<GmmModel, Error> {
        let model = if let Some(m) = &self.model {
            m.clone()
        } else if let Some(v) = self.variance {
            GmmModel::synthetic(self.n_classes, self.n_features as usize, v)?
        } else if let Some(g) = self.g_min {
            GmmModel::equidistant(self.n_classes, g)?
        } else {
            return Err(Error::InvalidConfig("one of model, variance or g_min is required".into()));
        };
        if model.num_classes() != self.n_classes {
            return Err(Error::InvalidConfig(format!(
                "model has {} classes but n_classes is {}",
                model.num_classes(),
                self.n_classes
            )));
        }
        Ok(model)
    }

    /// Scenario parameters, with `g_min` taken from the resolved model.
    pub fn scenario(&self) -> Result<(GmmModel, ScenarioConfig), Error> {
        let model = self.gmm_model()?;
        let cfg = ScenarioConfig::new(
            self.deadline_s,
            self.sensing_time_s,
            self.link()?,
            self.n_classes,
            model.min_discriminant_gain(),
            self.eta,
        )?;
        Ok((model, cfg))
    }
}

/// Failure of one CLI invocation, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InfeasibleDeadline(_) | Error::TargetUnreachable { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ultralola", version, about = "Packet-length optimization for deadline-constrained edge inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment config (JSON). Defaults to the selected preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in preset used when --config is absent.
    #[arg(long, global = true, default_value = "default", value_parser = ["default", "binary"])]
    pub preset: String,
    /// Override one config field, KEY=VALUE (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Simulation worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Ms,
    Mv,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Ms => Scenario::MultiSnapshot,
            ScenarioArg::Mv => Scenario::MultiView,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ultralola,
    Urllc,
    Shannon,
    Brute,
    Table,
}

impl MethodArg {
    fn method(self, scenario: Scenario) -> Method {
        match self {
            MethodArg::Ultralola => match scenario {
                Scenario::MultiSnapshot => Method::UltraLoLaMs,
                Scenario::MultiView => Method::UltraLoLaMv,
            },
            MethodArg::Urllc => Method::Urllc,
            MethodArg::Shannon => Method::ShannonRate,
            MethodArg::Brute => Method::BruteForce,
            MethodArg::Table => Method::LookupTable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarArg {
    #[value(name = "packet_length")]
    PacketLength,
    #[value(name = "snr_db")]
    SnrDb,
    #[value(name = "deadline_s")]
    DeadlineS,
}

impl From<VarArg> for SweepVariable {
    fn from(v: VarArg) -> Self {
        match v {
            VarArg::PacketLength => SweepVariable::PacketLength,
            VarArg::SnrDb => SweepVariable::SnrDb,
            VarArg::DeadlineS => SweepVariable::DeadlineS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Accuracy against packet length, multi-snapshot.
    TradeoffMs,
    /// Accuracy against packet length, multi-view.
    TradeoffMv,
    SnrSweepMs,
    SnrSweepMv,
    DeadlineSweepMs,
    DeadlineSweepMv,
    /// Closed-form multi-snapshot length against brute force over SNR.
    MsOptimumSnr,
    /// Closed-form multi-view length against brute force over SNR.
    MvOptimumSnr,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decoding error, success probability and dispersion at one length.
    EvalEpsilon {
        #[arg(long)]
        d: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Choose a packet length.
    Optimize {
        #[arg(long, value_enum, default_value = "ms")]
        scenario: ScenarioArg,
        #[arg(long, value_enum, default_value = "ultralola")]
        method: MethodArg,
        /// Accuracy table (JSON) for --method table.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Decoding-error target of the URLLC baseline.
        #[arg(long, default_value_t = URLLC_TARGET)]
        target_eps: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo accuracy at one packet length.
    Simulate {
        #[arg(long, value_enum, default_value = "ms")]
        scenario: ScenarioArg,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep one variable and emit CSV.
    Sweep {
        #[arg(long, value_enum, default_value = "ms")]
        scenario: ScenarioArg,
        #[arg(long, value_enum)]
        var: VarArg,
        /// Inclusive grid LO:HI:STEP.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        /// Methods to compare (repeatable); ignored for packet_length sweeps.
        #[arg(long = "method", value_enum)]
        methods: Vec<MethodArg>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Regenerate the data behind one of the standard plots as CSV.
    ReproduceFigure {
        #[arg(long, value_enum)]
        figure: Figure,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Parses `lo:hi:step` into an inclusive increasing grid.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("range '{spec}' is not LO:HI:STEP"));
    let parts: Vec<f64> =
        spec.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok(linear_grid(lo, hi, step))
}

fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as u64;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let base = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::preset(&common.preset)?,
    };
    base.with_overrides(&common.overrides)
}

fn emit(common: &CommonArgs, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &common.out {
        Some(path) => write_file(path, text),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn json_with_config(body: Value, cfg: &ExperimentConfig) -> String {
    let mut map = match body {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    map.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("json");
    s.push('\n');
    s
}

fn csv_with_config(csv: &str, cfg: &ExperimentConfig) -> String {
    format!("# config: {}\n{csv}", serde_json::to_string(cfg).expect("config serializes"))
}

struct FigurePlan {
    scenario: Scenario,
    variable: SweepVariable,
    grid: Vec<f64>,
    methods: Vec<Method>,
}

const ALL_METHODS: [MethodArg; 4] = [MethodArg::Ultralola, MethodArg::Urllc, MethodArg::Shannon, MethodArg::Brute];

fn figure_plan(figure: Figure, cfg: &ScenarioConfig) -> Result<FigurePlan, Error> {
    let methods = |scenario: Scenario, list: &[MethodArg]| list.iter().map(|m| m.method(scenario)).collect::<Vec<_>>();
    let tradeoff = |scenario: Scenario| -> Result<FigurePlan, Error> {
        let hi = search_limit(cfg, scenario)?;
        let step = (hi / 40).max(1);
        let grid = (1..=hi).step_by(step as usize).map(|d| d as f64).collect();
        Ok(FigurePlan { scenario, variable: SweepVariable::PacketLength, grid, methods: Vec::new() })
    };
    let snr = |scenario: Scenario, lo: f64, list: &[MethodArg]| FigurePlan {
        scenario,
        variable: SweepVariable::SnrDb,
        grid: linear_grid(lo, 20.0, 2.0),
        methods: methods(scenario, list),
    };
    let deadline = |scenario: Scenario| FigurePlan {
        scenario,
        variable: SweepVariable::DeadlineS,
        grid: (1..=10).map(|i| cfg.deadline_s * 0.2 * i as f64).collect(),
        methods: methods(scenario, &ALL_METHODS),
    };
    let both = [MethodArg::Ultralola, MethodArg::Brute];
    Ok(match figure {
        Figure::TradeoffMs => tradeoff(Scenario::MultiSnapshot)?,
        Figure::TradeoffMv => tradeoff(Scenario::MultiView)?,
        Figure::SnrSweepMs => snr(Scenario::MultiSnapshot, 0.0, &ALL_METHODS),
        Figure::SnrSweepMv => snr(Scenario::MultiView, 0.0, &ALL_METHODS),
        Figure::DeadlineSweepMs => deadline(Scenario::MultiSnapshot),
        Figure::DeadlineSweepMv => deadline(Scenario::MultiView),
        Figure::MsOptimumSnr => snr(Scenario::MultiSnapshot, 0.0, &both),
        Figure::MvOptimumSnr => snr(Scenario::MultiView, 2.0, &both),
    })
}

fn workers(common: &CommonArgs) -> usize {
    common.workers.unwrap_or_else(mc::default_workers)
}

/// Executes a parsed command, writing its artifact to `--out` or `stdout`.
pub fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::EvalEpsilon { d, common } => {
            let cfg = load_config(&common)?;
            let link = cfg.link()?;
            if d == 0 {
                return Err(CliError::Config("--d must be positive".into()));
            }
            let body = json!({
                "packet_len": d,
                "epsilon": decode_error_prob(&link, d),
                "rho": success_prob(&link, d),
                "dispersion": link.dispersion(),
                "capacity": link.capacity(),
            });
            emit(&common, &json_with_config(body, &cfg), stdout)
        }
        Command::Optimize { scenario, method, table, target_eps, common } => {
            let cfg = load_config(&common)?;
            let scenario = Scenario::from(scenario);
            let plan = if method == MethodArg::Table {
                let path = table.ok_or_else(|| CliError::Config("--method table needs --table PATH".into()))?;
                let text = fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let table: AccuracyTable =
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid table: {e}")))?;
                lookup_table_optimize(&table, &cfg.link()?)
            } else {
                let (_, sc) = cfg.scenario()?;
                match method {
                    MethodArg::Ultralola => optimize(&sc, scenario)?,
                    MethodArg::Urllc => urllc_baseline(&sc, scenario, target_eps)?,
                    MethodArg::Shannon => shannon_baseline(&sc, scenario)?,
                    MethodArg::Brute => brute_force(&sc, scenario)?,
                    MethodArg::Table => unreachable!("handled above"),
                }
            };
            let mut body = serde_json::to_value(plan).expect("plan serializes");
            body["scenario"] = json!(scenario.as_str());
            emit(&common, &json_with_config(body, &cfg), stdout)
        }
        Command::Simulate { scenario, d, trials, seed, common } => {
            let cfg = load_config(&common)?;
            let scenario = Scenario::from(scenario);
            if d == 0 || trials == 0 {
                return Err(CliError::Config("--d and --trials must be positive".into()));
            }
            let (model, sc) = cfg.scenario()?;
            let result = simulate(&model, &sc, scenario, d, trials, seed, workers(&common));
            let mut body = serde_json::to_value(result).expect("result serializes");
            body["scenario"] = json!(scenario.as_str());
            body["packet_len"] = json!(d);
            body["analytic_accuracy"] = json!(crate::optimizer::exact_bound(&sc, scenario, d));
            emit(&common, &json_with_config(body, &cfg), stdout)
        }
        Command::Sweep { scenario, var, range, methods, trials, seed, common } => {
            let cfg = load_config(&common)?;
            let scenario = Scenario::from(scenario);
            let grid = parse_range(&range)?;
            let methods = if methods.is_empty() { ALL_METHODS.to_vec() } else { methods };
            if methods.contains(&MethodArg::Table) {
                return Err(CliError::Config("the table method cannot be swept".into()));
            }
            let (model, sc) = cfg.scenario()?;
            let spec = SweepSpec {
                scenario,
                variable: var.into(),
                grid,
                methods: methods.iter().map(|m| m.method(scenario)).collect(),
                trials,
                seed,
                workers: workers(&common),
            };
            let rows = sweep(&model, &sc, &spec)?;
            emit(&common, &csv_with_config(&rows_to_csv(&rows), &cfg), stdout)
        }
        Command::ReproduceFigure { figure, trials, seed, common } => {
            let cfg = load_config(&common)?;
            let (model, sc) = cfg.scenario()?;
            let plan = figure_plan(figure, &sc)?;
            let spec = SweepSpec {
                scenario: plan.scenario,
                variable: plan.variable,
                grid: plan.grid,
                methods: plan.methods,
                trials,
                seed,
                workers: workers(&common),
            };
            let rows = sweep(&model, &sc, &spec)?;
            emit(&common, &csv_with_config(&rows_to_csv(&rows), &cfg), stdout)
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status; diagnostics go to standard error.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ultralola: {e}");
            e.exit_code()
        }
    }
}
