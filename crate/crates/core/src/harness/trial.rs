use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{oamp_mmv_single, swomp};
use crate::channel::{assemble_h, ChannelRealization};
use crate::config::SystemConfig;
use crate::error::{config_err, Result};
use crate::frontend::{observe, received_signal, QuantizedFrame, QuantizerSpec};
use crate::harness::metrics::{compute_metrics, TrialMetrics};
use crate::pilot::{make_pilot, PilotMatrix};
use crate::rng::{stream_rng, Stream};
use crate::scenario::{place_devices, power_control, rician_factor, sample_activity};
use crate::tsoamp::{self, DetectionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    /// Two-stage detector as configured.
    TsOamp,
    /// Two-stage detector with a single full-array subarray.
    TsOampNsub1,
    /// Two-stage detector with per-antenna (not shared) sparsity in stage 1.
    TsOampPerColumn,
    OampMmv,
    Swomp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::TsOamp, Algorithm::TsOampNsub1, Algorithm::TsOampPerColumn, Algorithm::OampMmv, Algorithm::Swomp];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::TsOamp => "tsoamp",
            Algorithm::TsOampNsub1 => "tsoamp-nsub1",
            Algorithm::TsOampPerColumn => "tsoamp-percol",
            Algorithm::OampMmv => "oampmmv",
            Algorithm::Swomp => "swomp",
        }
    }

    /// Configuration the algorithm actually runs with.
    pub fn effective_config(self, cfg: &SystemConfig) -> SystemConfig {
        let mut c = cfg.clone();
        match self {
            Algorithm::TsOampNsub1 => c.n_sub = 1,
            Algorithm::TsOampPerColumn => c.common_support = false,
            _ => {}
        }
        c
    }

    pub fn run(self, input: &TrialInput, cfg: &SystemConfig) -> Result<DetectionResult> {
        let cfg = self.effective_config(cfg);
        match self {
            Algorithm::TsOamp | Algorithm::TsOampNsub1 | Algorithm::TsOampPerColumn => tsoamp::run(&input.frame, &input.pilot, &cfg),
            Algorithm::OampMmv => oamp_mmv_single(&input.frame, &input.pilot, &cfg),
            Algorithm::Swomp => Ok(swomp(&input.frame, &input.pilot, &cfg)),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Algorithm::ALL.into_iter().find(|a| a.id() == s).ok_or_else(|| {
            let ids: Vec<&str> = Algorithm::ALL.iter().map(|a| a.id()).collect();
            format!("unknown algorithm `{s}` (expected one of {})", ids.join(", "))
        })
    }
}

/// Everything drawn at random for one trial. Shared by all algorithms.
#[derive(Debug, Clone)]
pub struct TrialInput {
    pub channel: ChannelRealization,
    pub pilot: PilotMatrix,
    pub frame: QuantizedFrame,
}

/// Draws scenario, channel, pilot and observation for `seed`.
pub fn generate(cfg: &SystemConfig, seed: u64) -> Result<TrialInput> {
    cfg.validate()?;
    let placement = place_devices(cfg, &mut stream_rng(seed, Stream::Placement))?;
    let activity = sample_activity(cfg, &mut stream_rng(seed, Stream::Activity));
    let kappa: Vec<f64> = placement.d_mid.iter().map(|&d| rician_factor(d)).collect();
    let power: Vec<f64> = placement.d_mid.iter().map(|&d| power_control(d, cfg.p_t_watts())).collect();
    let channel = assemble_h(&activity, &placement, &kappa, &power, cfg)?;
    let pilot = make_pilot(cfg.m, cfg.k, &mut stream_rng(seed, Stream::Pilot))?;
    let y = received_signal(&pilot, channel.h.view(), cfg.noise_variance(), &mut stream_rng(seed, Stream::Noise));
    let frame = observe(y.view(), QuantizerSpec::new(cfg.bits, cfg.clamp), &cfg.hi_set());
    Ok(TrialInput { channel, pilot, frame })
}

/// Runs every algorithm in `algorithms` on the same trial input.
pub fn run_trial_multi(cfg: &SystemConfig, algorithms: &[Algorithm], seed: u64) -> Result<Vec<TrialMetrics>> {
    if algorithms.is_empty() {
        return Err(config_err("no algorithm selected"));
    }
    let input = generate(cfg, seed)?;
    let hash = cfg.hash();
    algorithms
        .iter()
        .map(|&alg| {
            let start = Instant::now();
            let result = alg.run(&input, cfg)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let m = compute_metrics(&result, &input.channel, alg.id(), &hash, seed, ms);
            if m.clamp_events > 0 {
                log::debug!("{} seed {seed}: {} clamp events", alg.id(), m.clamp_events);
            }
            Ok(m)
        })
        .collect()
}

pub fn run_trial(cfg: &SystemConfig, algorithm: Algorithm, seed: u64) -> Result<TrialMetrics> {
    Ok(run_trial_multi(cfg, &[algorithm], seed)?.remove(0))
}
