//! Finite-blocklength link under truncated channel inversion.
//!
//! An active device inverts its fading coefficient, so every transmission
//! that happens sees an AWGN channel at the target receive SNR. Decoding
//! errors follow the normal approximation of the maximal coding rate.

use std::f64::consts::LN_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::q_function;

/// Link parameters. `snr` is linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub snr: f64,
    pub activation_prob: f64,
    pub bandwidth_hz: f64,
    pub bits_per_feature: u32,
    pub feature_dim: u32,
}

impl LinkConfig {
    pub fn new(
        snr: f64,
        activation_prob: f64,
        bandwidth_hz: f64,
        bits_per_feature: u32,
        feature_dim: u32,
    ) -> Result<Self> {
        let cfg = Self { snr, activation_prob, bandwidth_hz, bits_per_feature, feature_dim };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(Error::InvalidConfig(format!("snr must be positive, got {}", self.snr)));
        }
        if !(self.activation_prob > 0.0 && self.activation_prob <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "activation probability must lie in (0, 1], got {}",
                self.activation_prob
            )));
        }
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {}", self.bandwidth_hz)));
        }
        if self.bits_per_feature == 0 || self.feature_dim == 0 {
            return Err(Error::InvalidConfig("payload must carry at least one bit".into()));
        }
        Ok(())
    }

    /// Payload size `N * Q_B` in bits.
    pub fn payload_bits(&self) -> f64 {
        f64::from(self.feature_dim) * f64::from(self.bits_per_feature)
    }

    /// AWGN capacity in bits per channel use.
    pub fn capacity(&self) -> f64 {
        self.snr.ln_1p() / LN_2
    }

    pub fn dispersion(&self) -> f64 {
        dispersion(self.snr)
    }

    /// Argument of `Q` in the decoding-error approximation, for real-valued
    /// blocklength `d`.
    pub fn error_exponent(&self, d: f64) -> f64 {
        LN_2 * (d / self.dispersion()).sqrt() * (self.capacity() - self.payload_bits() / d)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Channel dispersion `1 - (1 + snr)^-2`.
pub fn dispersion(snr: f64) -> f64 {
    1.0 - (1.0 + snr).powi(-2)
}

/// Decoding error probability of a `packet_len`-symbol packet. Above
/// capacity this exceeds one half and is returned unchanged.
pub fn decode_error_prob(cfg: &LinkConfig, packet_len: u64) -> f64 {
    decode_error_prob_real(cfg, packet_len as f64)
}

pub fn decode_error_prob_real(cfg: &LinkConfig, d: f64) -> f64 {
    q_function(cfg.error_exponent(d))
}

/// Probability that a packet is both sent and decoded.
pub fn success_prob(cfg: &LinkConfig, packet_len: u64) -> f64 {
    cfg.activation_prob * (1.0 - decode_error_prob(cfg, packet_len))
}

/// Gain threshold giving activation probability `activation_prob` under
/// unit-mean exponential channel gain (Rayleigh amplitude).
pub fn rayleigh_threshold(activation_prob: f64) -> Result<f64> {
    if !(activation_prob > 0.0 && activation_prob <= 1.0) {
        return Err(Error::InvalidConfig(format!("activation probability must lie in (0, 1], got {activation_prob}")));
    }
    Ok(-activation_prob.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransmissionOutcome {
    /// Channel gain below threshold; the device stays silent.
    Inactive,
    DecodeFail,
    Success,
}

/// Draws the outcome of one packet given activation and decoding-error
/// probabilities. Consumes exactly two uniforms.
pub fn sample_outcome<R: Rng + ?Sized>(activation_prob: f64, decode_error: f64, rng: &mut R) -> TransmissionOutcome {
    let active: f64 = rng.random();
    let decode: f64 = rng.random();
    if active >= activation_prob {
        TransmissionOutcome::Inactive
    } else if decode < decode_error {
        TransmissionOutcome::DecodeFail
    } else {
        TransmissionOutcome::Success
    }
}

pub fn sample_transmission<R: Rng + ?Sized>(cfg: &LinkConfig, packet_len: u64, rng: &mut R) -> TransmissionOutcome {
    sample_outcome(cfg.activation_prob, decode_error_prob(cfg, packet_len), rng)
}
