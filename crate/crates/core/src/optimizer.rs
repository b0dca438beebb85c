//! Packet-length selection.
//!
//! The closed-form policies maximize the logistic surrogates: a bisection
//! on the sign of the surrogate's derivative for multi-snapshot sensing and
//! a scalar transcendental equation for multi-view sensing, each followed by
//! the floor/ceil rounding rule. Brute force, URLLC and Shannon-rate
//! baselines and the lookup-table method share the same [`PacketPlan`]
//! output.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::accuracy::{
    clamp_accuracy, d_max_ms, d_max_mv, e2e_ms_lower_bound, e2e_mv_exact_bound, k_ms, k_mv, link_state,
    mv_mean_field_accuracy, mv_sign_function, nu_ms, nu_mv, psi_link, psi_sensing, ScenarioConfig,
};
use crate::channel::{decode_error_prob, success_prob, LinkConfig};
use crate::error::{Error, Result};
use crate::numerics::{bisect, robust_ceil, robust_floor, sigmoid, RootBracket};

/// Target decoding error of the URLLC baseline.
pub const URLLC_TARGET: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// One sensor, `K_ms` snapshots fused into a single packet.
    #[serde(rename = "ms")]
    MultiSnapshot,
    /// `K_mv` sensors, one packet each in TDMA slots.
    #[serde(rename = "mv")]
    MultiView,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::MultiSnapshot => "ms",
            Scenario::MultiView => "mv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(rename = "ultralola_ms")]
    UltraLoLaMs,
    #[serde(rename = "ultralola_mv")]
    UltraLoLaMv,
    BruteForce,
    Urllc,
    ShannonRate,
    LookupTable,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::UltraLoLaMs => "ultralola_ms",
            Method::UltraLoLaMv => "ultralola_mv",
            Method::BruteForce => "brute_force",
            Method::Urllc => "urllc",
            Method::ShannonRate => "shannon_rate",
            Method::LookupTable => "lookup_table",
        }
    }
}

/// A chosen packet length with the quantities it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketPlan {
    pub packet_len: u64,
    pub num_views: u64,
    pub decode_error: f64,
    pub success_prob: f64,
    pub predicted_accuracy: f64,
    pub method: Method,
    /// Objective the method maximized, evaluated at `packet_len`.
    pub surrogate_value: f64,
    /// Stationary point of the relaxed surrogate, when it is interior.
    pub continuous_optimum: Option<f64>,
}

impl PacketPlan {
    /// Whether sensing plus transmission fit inside the deadline.
    pub fn meets_deadline(&self, cfg: &ScenarioConfig, scenario: Scenario) -> bool {
        let d = self.packet_len as f64;
        let k = self.num_views as f64;
        let slack = 1e-12 * cfg.deadline_s;
        match scenario {
            Scenario::MultiSnapshot => d / cfg.link.bandwidth_hz + k * cfg.sensing_time_s <= cfg.deadline_s + slack,
            Scenario::MultiView => d * k / cfg.link.bandwidth_hz + cfg.sensing_time_s <= cfg.deadline_s + slack,
        }
    }
}

fn views(cfg: &ScenarioConfig, scenario: Scenario, d: u64) -> u64 {
    match scenario {
        Scenario::MultiSnapshot => k_ms(cfg, d),
        Scenario::MultiView => k_mv(cfg, d),
    }
}

/// Exact analytical accuracy bound of a scenario at an integer length.
pub fn exact_bound(cfg: &ScenarioConfig, scenario: Scenario, d: u64) -> f64 {
    match scenario {
        Scenario::MultiSnapshot => e2e_ms_lower_bound(cfg, d),
        Scenario::MultiView => e2e_mv_exact_bound(cfg, d),
    }
}

fn plan(
    cfg: &ScenarioConfig,
    scenario: Scenario,
    d: u64,
    method: Method,
    predicted: f64,
    surrogate_value: f64,
    continuous_optimum: Option<f64>,
) -> PacketPlan {
    let (decode_error, success_prob) = link_state(cfg, d);
    PacketPlan {
        packet_len: d,
        num_views: views(cfg, scenario, d),
        decode_error,
        success_prob,
        predicted_accuracy: clamp_accuracy(cfg, predicted),
        method,
        surrogate_value,
        continuous_optimum,
    }
}

/// Largest integer length the baselines and brute force may pick.
pub fn search_limit(cfg: &ScenarioConfig, scenario: Scenario) -> Result<u64> {
    match scenario {
        Scenario::MultiSnapshot => {
            let d = robust_floor(cfg.deadline_symbols());
            if d < 1.0 {
                return Err(Error::InfeasibleDeadline(format!(
                    "no channel use fits before the deadline (T B_W = {})",
                    cfg.deadline_symbols()
                )));
            }
            Ok(d as u64)
        }
        Scenario::MultiView => d_max_mv(cfg),
    }
}

/// Picks `floor(x)` or `ceil(x)`, clamped to `[lo, hi]`, whichever scores
/// higher; ties go to the floor.
pub fn round_by<F: Fn(f64) -> f64>(x: f64, lo: u64, hi: u64, score: F) -> u64 {
    let fl = (x.floor().max(lo as f64) as u64).min(hi);
    let ce = (x.ceil().max(lo as f64) as u64).min(hi);
    if score(fl as f64) >= score(ce as f64) {
        fl
    } else {
        ce
    }
}

fn endpoint_argmax<F: Fn(f64) -> f64>(hi: u64, score: F) -> u64 {
    if score(1.0) >= score(hi as f64) {
        1
    } else {
        hi
    }
}

/// Smallest maximizer of `score` over `1..=hi`.
fn grid_argmax<F: Fn(u64) -> f64>(hi: u64, score: F) -> (u64, f64) {
    let mut best = (1, score(1));
    for d in 2..=hi {
        let v = score(d);
        if v > best.1 {
            best = (d, v);
        }
    }
    best
}

/// Function whose sign equals the sign of the multi-snapshot surrogate's
/// derivative on `[1, d_max_ms]`.
pub fn ms_sign_function(cfg: &ScenarioConfig, d: f64) -> f64 {
    let link = &cfg.link;
    let c_ms = LN_2 / cfg.separation() * (cfg.sensing_time_s * link.bandwidth_hz / link.dispersion()).sqrt();
    let link_gain = c_ms
        * (link.bandwidth_hz * cfg.deadline_s / d - 1.0).max(0.0).sqrt()
        * (link.capacity() + link.payload_bits() / d);
    let psi_i = psi_sensing(cfg, d);
    let (up, down) = (sigmoid(psi_i), sigmoid(-psi_i));
    let sensing_loss = (1.0 + psi_link(cfg, d).exp()) * up * down / (1.0 / cfg.num_classes as f64 - down);
    link_gain - sensing_loss
}

/// Closed-form multi-snapshot packet length.
pub fn optimize_ms(cfg: &ScenarioConfig) -> Result<PacketPlan> {
    let d_max = d_max_ms(cfg)?;
    let nu = |d: f64| nu_ms(cfg, d);
    let f = |d: f64| ms_sign_function(cfg, d);
    let (d_star, continuous) = if d_max > 1 && f(1.0) * f(d_max as f64) < 0.0 {
        let root = bisect(f, &RootBracket::with_defaults(1.0, d_max as f64)?)?;
        (round_by(root, 1, d_max, nu), Some(root))
    } else {
        (endpoint_argmax(d_max, nu), None)
    };
    Ok(plan(
        cfg,
        Scenario::MultiSnapshot,
        d_star,
        Method::UltraLoLaMs,
        e2e_ms_lower_bound(cfg, d_star),
        nu(d_star as f64),
        continuous,
    ))
}

/// Constant of the multi-view stationarity equation,
/// `ln^2(2) η^2 log2(1+γ) N Q_B / V`.
pub fn mv_omega(link: &LinkConfig, eta: f64) -> f64 {
    LN_2 * LN_2 * eta * eta * link.capacity() * link.payload_bits() / link.dispersion()
}

/// Residual of the stationarity equation in the scaled variable
/// `x = α sqrt(D)`: `(x + ω/x)/2 - exp(x - ω/x) - 1`.
pub fn mv_stationarity_residual(x: f64, omega: f64) -> f64 {
    0.5 * (x + omega / x) - (x - omega / x).exp() - 1.0
}

/// Unique positive root of [`mv_stationarity_residual`].
pub fn solve_mv_stationarity(omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidConfig(format!("omega must be positive, got {omega}")));
    }
    let q = |x: f64| mv_stationarity_residual(x, omega);
    let lo = 1e-9;
    let mut hi = omega.sqrt().max(1.0);
    let mut doublings = 0;
    while q(hi) >= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NoConvergence { max_iter: 200 });
        }
    }
    bisect(q, &RootBracket::new(lo, hi, 4.0 * f64::EPSILON * hi, 2000)?)
}

/// The closed-form multi-view solution before the integer-grid check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvClosedForm {
    /// Whether the derivative changes sign across `[1, d_max_mv]`.
    pub interior: bool,
    pub omega: f64,
    pub zeta: Option<f64>,
    pub continuous_optimum: Option<f64>,
    pub packet_len: u64,
}

pub fn mv_closed_form(cfg: &ScenarioConfig) -> Result<MvClosedForm> {
    let d_max = d_max_mv(cfg)?;
    let nu = |d: f64| nu_mv(cfg, d);
    let omega = mv_omega(&cfg.link, cfg.eta);
    let f = |d: f64| mv_sign_function(cfg, d);
    if d_max > 1 && f(1.0) * f(d_max as f64) < 0.0 {
        let zeta = solve_mv_stationarity(omega)?;
        let link = &cfg.link;
        let scale = LN_2 * cfg.eta * link.capacity();
        let d_cont = link.dispersion() * zeta * zeta / (scale * scale);
        Ok(MvClosedForm {
            interior: true,
            omega,
            zeta: Some(zeta),
            continuous_optimum: Some(d_cont),
            packet_len: round_by(d_cont, 1, d_max, nu),
        })
    } else {
        Ok(MvClosedForm {
            interior: false,
            omega,
            zeta: None,
            continuous_optimum: None,
            packet_len: endpoint_argmax(d_max, nu),
        })
    }
}

/// Multi-view packet length: closed form, verified against the integer
/// grid of the surrogate (the grid winner is returned).
pub fn optimize_mv(cfg: &ScenarioConfig) -> Result<PacketPlan> {
    let d_max = d_max_mv(cfg)?;
    let closed = mv_closed_form(cfg)?;
    let (d_star, nu_star) = grid_argmax(d_max, |d| nu_mv(cfg, d as f64));
    Ok(plan(
        cfg,
        Scenario::MultiView,
        d_star,
        Method::UltraLoLaMv,
        mv_mean_field_accuracy(cfg, nu_star),
        nu_star,
        closed.continuous_optimum,
    ))
}

/// The closed-form policy of the given scenario.
pub fn optimize(cfg: &ScenarioConfig, scenario: Scenario) -> Result<PacketPlan> {
    match scenario {
        Scenario::MultiSnapshot => optimize_ms(cfg),
        Scenario::MultiView => optimize_mv(cfg),
    }
}

/// Exhaustive search of the exact bound over every feasible length.
pub fn brute_force(cfg: &ScenarioConfig, scenario: Scenario) -> Result<PacketPlan> {
    let hi = search_limit(cfg, scenario)?;
    let (d, value) = grid_argmax(hi, |d| exact_bound(cfg, scenario, d));
    Ok(plan(cfg, scenario, d, Method::BruteForce, value, value, None))
}

/// Shortest packet whose decoding error is at most `target_eps`.
pub fn urllc_baseline(cfg: &ScenarioConfig, scenario: Scenario, target_eps: f64) -> Result<PacketPlan> {
    let hi = search_limit(cfg, scenario)?;
    let d = (1..=hi)
        .find(|&d| decode_error_prob(&cfg.link, d) <= target_eps)
        .ok_or(Error::TargetUnreachable { target: target_eps })?;
    let value = exact_bound(cfg, scenario, d);
    Ok(plan(cfg, scenario, d, Method::Urllc, value, value, None))
}

/// Packet length that runs the link exactly at capacity,
/// `ceil(N Q_B / log2(1 + γ))`.
pub fn shannon_packet_len(link: &LinkConfig) -> u64 {
    robust_ceil(link.payload_bits() / link.capacity()).max(1.0) as u64
}

pub fn shannon_baseline(cfg: &ScenarioConfig, scenario: Scenario) -> Result<PacketPlan> {
    let hi = search_limit(cfg, scenario)?;
    let d = shannon_packet_len(&cfg.link);
    if d > hi {
        return Err(Error::InfeasibleDeadline(format!(
            "capacity-rate packet of {d} channel uses exceeds the limit {hi}"
        )));
    }
    let value = exact_bound(cfg, scenario, d);
    Ok(plan(cfg, scenario, d, Method::ShannonRate, value, value, None))
}

#[derive(Debug, Serialize, Deserialize)]
struct AccuracyTableJson {
    num_classes: usize,
    entries: BTreeMap<u64, f64>,
}

/// Trained accuracy per packet length, for classifiers without an
/// analytical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AccuracyTableJson", into = "AccuracyTableJson")]
pub struct AccuracyTable {
    num_classes: usize,
    entries: BTreeMap<u64, f64>,
}

impl TryFrom<AccuracyTableJson> for AccuracyTable {
    type Error = Error;

    fn try_from(raw: AccuracyTableJson) -> Result<Self> {
        AccuracyTable::new(raw.num_classes, raw.entries)
    }
}

impl From<AccuracyTable> for AccuracyTableJson {
    fn from(t: AccuracyTable) -> Self {
        Self { num_classes: t.num_classes, entries: t.entries }
    }
}

impl AccuracyTable {
    pub fn new(num_classes: usize, entries: BTreeMap<u64, f64>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidConfig("accuracy table needs at least two classes".into()));
        }
        if entries.is_empty() {
            return Err(Error::InvalidConfig("accuracy table is empty".into()));
        }
        if entries.keys().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("packet lengths must be positive".into()));
        }
        if entries.values().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidConfig("table accuracies must lie in [0, 1]".into()));
        }
        Ok(Self { num_classes, entries })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn entries(&self) -> &BTreeMap<u64, f64> {
        &self.entries
    }
}

/// Table entry maximizing `rho(D) Ψ(D) + (1 - rho(D)) / L`; ties go to the
/// shortest packet. The table carries no deadline, so `num_views` is 0.
pub fn lookup_table_optimize(table: &AccuracyTable, link: &LinkConfig) -> PacketPlan {
    let inv_l = 1.0 / table.num_classes as f64;
    let score = |d: u64, acc: f64| {
        let rho = success_prob(link, d);
        rho * acc + (1.0 - rho) * inv_l
    };
    let mut best: Option<(u64, f64)> = None;
    for (&d, &acc) in &table.entries {
        let s = score(d, acc);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((d, s));
        }
    }
    let (d, value) = best.expect("table is nonempty");
    PacketPlan {
        packet_len: d,
        num_views: 0,
        decode_error: decode_error_prob(link, d),
        success_prob: success_prob(link, d),
        predicted_accuracy: value.clamp(inv_l, 1.0),
        method: Method::LookupTable,
        surrogate_value: value,
        continuous_optimum: None,
    }
}

/// Dispatches a non-table method by name.
pub fn run_method(cfg: &ScenarioConfig, scenario: Scenario, method: Method) -> Result<PacketPlan> {
    match method {
        Method::UltraLoLaMs | Method::UltraLoLaMv => optimize(cfg, scenario),
        Method::BruteForce => brute_force(cfg, scenario),
        Method::Urllc => urllc_baseline(cfg, scenario, URLLC_TARGET),
        Method::ShannonRate => shannon_baseline(cfg, scenario),
        Method::LookupTable => Err(Error::InvalidConfig("the lookup-table method needs an accuracy table".into())),
    }
}
