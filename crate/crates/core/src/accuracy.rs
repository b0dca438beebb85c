//! Deadline bookkeeping and the analytical end-to-end accuracy models for
//! multi-snapshot (one sensor, one fused packet) and multi-view (many
//! sensors, TDMA slots) sensing, together with their smooth surrogates.

use std::f64::consts::LN_2;

use crate::channel::{decode_error_prob, success_prob, LinkConfig};
use crate::error::{Error, Result};
use crate::gmm::accuracy_lower_bound;
use crate::numerics::{ln_binomial, ln_sigmoid, q_function, robust_floor, sigmoid};

/// Default logistic fitting coefficient for the Gaussian tail.
pub const DEFAULT_ETA: f64 = 1.7;

/// One experiment instance: deadline, sensing cadence, link and the
/// classification difficulty summarized by `(L, g_min)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub deadline_s: f64,
    pub sensing_time_s: f64,
    pub link: LinkConfig,
    pub num_classes: usize,
    pub g_min: f64,
    pub eta: f64,
}

impl ScenarioConfig {
    pub fn new(
        deadline_s: f64,
        sensing_time_s: f64,
        link: LinkConfig,
        num_classes: usize,
        g_min: f64,
        eta: f64,
    ) -> Result<Self> {
        let cfg = Self { deadline_s, sensing_time_s, link, num_classes, g_min, eta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        if !(self.sensing_time_s > 0.0) || !(self.deadline_s > 0.0) {
            return Err(Error::InvalidConfig("deadline and sensing time must be positive".into()));
        }
        if !(self.deadline_s > self.sensing_time_s) {
            return Err(Error::InfeasibleDeadline(format!(
                "deadline {} s does not exceed the sensing time {} s",
                self.deadline_s, self.sensing_time_s
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("at least two classes are required".into()));
        }
        if !(self.g_min > 0.0) || !self.g_min.is_finite() {
            return Err(Error::InvalidConfig(format!("g_min must be positive, got {}", self.g_min)));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }

    /// Per-view separation `sqrt(g_min) / 2`.
    pub fn separation(&self) -> f64 {
        self.g_min.sqrt() / 2.0
    }

    /// Channel uses available before the deadline, `T * B_W`.
    pub fn deadline_symbols(&self) -> f64 {
        self.deadline_s * self.link.bandwidth_hz
    }

    /// Channel uses left after one sensing interval, `(T - Δ_S) * B_W`.
    pub fn slot_budget(&self) -> f64 {
        (self.deadline_s - self.sensing_time_s) * self.link.bandwidth_hz
    }

    fn inv_classes(&self) -> f64 {
        1.0 / self.num_classes as f64
    }
}

/// Snapshots that fit before the deadline when the fused packet takes
/// `packet_len` channel uses.
pub fn k_ms(cfg: &ScenarioConfig, packet_len: u64) -> u64 {
    let sensing_symbols = cfg.sensing_time_s * cfg.link.bandwidth_hz;
    let k = robust_floor((cfg.deadline_symbols() - packet_len as f64) / sensing_symbols);
    k.max(0.0) as u64
}

/// TDMA slots of `packet_len` channel uses that fit after one sensing
/// interval.
pub fn k_mv(cfg: &ScenarioConfig, packet_len: u64) -> u64 {
    robust_floor(cfg.slot_budget() / packet_len as f64).max(0.0) as u64
}

/// `rho * A(K) + (1 - rho) / L`, where `A` is the clamped classification
/// lower bound.
pub fn expected_accuracy_ms(num_classes: usize, g_min: f64, views: u64, rho: f64) -> f64 {
    rho * accuracy_lower_bound(num_classes, g_min, views) + (1.0 - rho) / num_classes as f64
}

/// Binomial average of the clamped classification bound over the number of
/// views that arrive, `|K̂| ~ Bin(views, rho)`.
pub fn expected_accuracy_mv(num_classes: usize, g_min: f64, views: u64, rho: f64) -> f64 {
    if views == 0 || rho <= 0.0 {
        return 1.0 / num_classes as f64;
    }
    if rho >= 1.0 {
        return accuracy_lower_bound(num_classes, g_min, views);
    }
    let (ln_p, ln_q) = (rho.ln(), (-rho).ln_1p());
    let sum: f64 = (0..=views)
        .map(|k| {
            let ln_pmf = ln_binomial(views, k) + k as f64 * ln_p + (views - k) as f64 * ln_q;
            ln_pmf.exp() * accuracy_lower_bound(num_classes, g_min, k)
        })
        .sum();
    // a convex combination of values in [1/L, 1]; clamp summation round-off
    sum.clamp(1.0 / num_classes as f64, 1.0)
}

/// Multi-snapshot lower bound at integer packet length.
pub fn e2e_ms_lower_bound(cfg: &ScenarioConfig, packet_len: u64) -> f64 {
    let rho = success_prob(&cfg.link, packet_len);
    expected_accuracy_ms(cfg.num_classes, cfg.g_min, k_ms(cfg, packet_len), rho)
}

/// Multi-view lower bound by exact binomial summation.
pub fn e2e_mv_exact_bound(cfg: &ScenarioConfig, packet_len: u64) -> f64 {
    let rho = success_prob(&cfg.link, packet_len);
    expected_accuracy_mv(cfg.num_classes, cfg.g_min, k_mv(cfg, packet_len), rho)
}

/// First-order (mean-field) approximation of the multi-view bound. Not
/// clamped: it can drop below `1/L` for many classes and few views.
pub fn e2e_mv_taylor(cfg: &ScenarioConfig, packet_len: u64) -> f64 {
    let mean_views = k_mv(cfg, packet_len) as f64 * success_prob(&cfg.link, packet_len);
    mv_mean_field_accuracy(cfg, mean_views)
}

/// `(L - 1) Q(-G sqrt(mean_views)) - (L - 2)`.
pub fn mv_mean_field_accuracy(cfg: &ScenarioConfig, mean_views: f64) -> f64 {
    let l = cfg.num_classes as f64;
    (l - 1.0) * q_function(-cfg.separation() * mean_views.sqrt()) - (l - 2.0)
}

/// Largest packet length for which the multi-snapshot surrogate keeps the
/// classification term above random guessing, before the `K_ms >= 1` cap.
pub fn d_max_ms_unclamped(cfg: &ScenarioConfig) -> f64 {
    let ln_l = ((cfg.num_classes - 1) as f64).ln();
    let ge = cfg.separation() * cfg.eta;
    robust_floor((cfg.deadline_s - cfg.sensing_time_s * ln_l * ln_l / (ge * ge)) * cfg.link.bandwidth_hz)
}

/// Upper end of the multi-snapshot search range, additionally capped so at
/// least one snapshot fits.
pub fn d_max_ms(cfg: &ScenarioConfig) -> Result<u64> {
    let d = d_max_ms_unclamped(cfg).min(robust_floor(cfg.slot_budget()));
    if d < 1.0 {
        return Err(Error::InfeasibleDeadline(format!("no packet length in the multi-snapshot range (D_max = {d})")));
    }
    Ok(d as u64)
}

/// Longest packet that still leaves one TDMA slot.
pub fn d_max_mv(cfg: &ScenarioConfig) -> Result<u64> {
    let d = robust_floor(cfg.slot_budget());
    if d < 1.0 {
        return Err(Error::InfeasibleDeadline(format!(
            "no TDMA slot fits before the deadline ((T - Δ_S) B_W = {})",
            cfg.slot_budget()
        )));
    }
    Ok(d as u64)
}

/// Sensing-side exponent `G η sqrt(T/Δ_S - D/(Δ_S B_W))`.
pub fn psi_sensing(cfg: &ScenarioConfig, d: f64) -> f64 {
    let views = (cfg.deadline_s - d / cfg.link.bandwidth_hz) / cfg.sensing_time_s;
    cfg.separation() * cfg.eta * views.max(0.0).sqrt()
}

/// Link-side exponent: the decoding-error argument scaled by `η`.
pub fn psi_link(cfg: &ScenarioConfig, d: f64) -> f64 {
    cfg.eta * cfg.link.error_exponent(d)
}

/// Derivative of [`psi_link`] in `d`.
pub fn psi_link_derivative(cfg: &ScenarioConfig, d: f64) -> f64 {
    let link = &cfg.link;
    LN_2 * cfg.eta / (2.0 * (link.dispersion() * d).sqrt()) * (link.capacity() + link.payload_bits() / d)
}

/// A surrogate evaluated at one packet length: the inner quantity being
/// maximized and the accuracy it maps to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogatePoint {
    pub nu: f64,
    pub accuracy: f64,
}

fn check_domain(d: f64, max: u64) -> Result<()> {
    if !(d >= 1.0 && d <= max as f64) {
        return Err(Error::DomainViolation { value: d, max });
    }
    Ok(())
}

/// Logistic surrogate of the multi-snapshot bound over real `d` in
/// `[1, d_max_ms]`.
pub fn surrogate_ms(cfg: &ScenarioConfig, d: f64) -> Result<SurrogatePoint> {
    check_domain(d, d_max_ms(cfg)?)?;
    let nu = nu_ms(cfg, d);
    let l = cfg.num_classes as f64;
    Ok(SurrogatePoint { nu, accuracy: cfg.link.activation_prob * (l - 1.0) * nu + 1.0 / l })
}

/// `(sigmoid(psi_I) - (L-1)/L) * sigmoid(psi_T)` without domain checks.
pub(crate) fn nu_ms(cfg: &ScenarioConfig, d: f64) -> f64 {
    (cfg.inv_classes() - sigmoid(-psi_sensing(cfg, d))) * sigmoid(psi_link(cfg, d))
}

/// `ln` of the multi-snapshot surrogate, evaluated in log space.
pub fn ln_nu_ms(cfg: &ScenarioConfig, d: f64) -> Result<f64> {
    check_domain(d, d_max_ms(cfg)?)?;
    let sensing = cfg.inv_classes() - sigmoid(-psi_sensing(cfg, d));
    Ok(sensing.ln() + ln_sigmoid(psi_link(cfg, d)))
}

/// Logistic surrogate of the expected number of received views, and the
/// mean-field accuracy it implies, over real `d` in `[1, d_max_mv]`.
pub fn surrogate_mv(cfg: &ScenarioConfig, d: f64) -> Result<SurrogatePoint> {
    check_domain(d, d_max_mv(cfg)?)?;
    let nu = nu_mv(cfg, d);
    Ok(SurrogatePoint { nu, accuracy: mv_mean_field_accuracy(cfg, nu) })
}

pub(crate) fn nu_mv(cfg: &ScenarioConfig, d: f64) -> f64 {
    cfg.slot_budget() * cfg.link.activation_prob / d * sigmoid(psi_link(cfg, d))
}

/// Sign-determining factor of the multi-view surrogate's derivative,
/// `-(1 + exp(psi_T)) + D psi_T'(D)`. Strictly decreasing in `d`.
pub fn mv_sign_function(cfg: &ScenarioConfig, d: f64) -> f64 {
    -(1.0 + psi_link(cfg, d).exp()) + d * psi_link_derivative(cfg, d)
}

/// Predicted accuracy clamped to the reportable range `[1/L, 1]`.
pub fn clamp_accuracy(cfg: &ScenarioConfig, value: f64) -> f64 {
    value.clamp(cfg.inv_classes(), 1.0)
}

/// Decoding error and success probability at an integer length, bundled.
pub fn link_state(cfg: &ScenarioConfig, packet_len: u64) -> (f64, f64) {
    (decode_error_prob(&cfg.link, packet_len), success_prob(&cfg.link, packet_len))
}
