//! Packet-length optimization for deadline-constrained edge inference over
//! short packets.
//!
//! Sensors observe an object, extract Gaussian-mixture features and upload
//! them over a finite-blocklength link; the server fuses what arrives and
//! classifies. Longer packets decode more reliably but leave less time for
//! observations, and this crate models, optimizes and simulates that
//! tradeoff.

pub mod accuracy;
pub mod channel;
pub mod cli;
pub mod error;
pub mod gmm;
pub mod mc;
pub mod numerics;
pub mod optimizer;
pub mod simulator;

pub use accuracy::ScenarioConfig;
pub use channel::{LinkConfig, TransmissionOutcome};
pub use error::{Error, Result};
pub use gmm::{ClassLabel, GmmModel};
pub use mc::SimResult;
pub use optimizer::{AccuracyTable, Method, PacketPlan, Scenario};
