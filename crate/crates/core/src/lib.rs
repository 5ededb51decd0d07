//! Joint activity detection and channel estimation for grant-free massive
//! access with an extra-large uniform linear array, near-field channels and
//! a mixed-resolution ADC front end.
//!
//! The pipeline of one Monte-Carlo trial is
//!
//! ```text
//! scenario -> channel -> pilot -> frontend -> {tsoamp | baselines} -> harness::metrics
//! ```
//!
//! [`tsoamp`] holds the two-stage detector: a spatial-domain stage that
//! de-quantizes the low-resolution antennas and detects the active devices
//! from the common support of their channels, followed by an angular-domain
//! stage that estimates each device's channel subarray by subarray.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod dequant;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod linalg;
pub mod oamp_core;
pub mod par;
pub mod pilot;
pub mod rng;
pub mod scenario;
pub mod tsoamp;

pub use config::{PathlossMode, Profile, SystemConfig};
pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
