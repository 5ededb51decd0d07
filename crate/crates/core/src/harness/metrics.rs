use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::tsoamp::DetectionResult;

/// Lowest NMSE reported, in dB (a perfect estimate would be minus infinity).
pub const NMSE_FLOOR_DB: f64 = -120.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub algorithm: String,
    pub aer: f64,
    /// `||H - H_hat||^2 / ||H||^2`; absent when no device is active.
    pub nmse: Option<f64>,
    pub nmse_db: Option<f64>,
    pub runtime_ms: f64,
    pub config_hash: String,
    pub seed: u64,
    pub iterations: usize,
    pub clamp_events: usize,
    pub finite: bool,
}

pub fn to_db(ratio: f64) -> f64 {
    (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
}

/// Activity error rate `(1/K) sum_k |alpha_hat_k - alpha_k|`.
pub fn activity_error_rate(alpha_hat: &[u8], alpha: &[u8]) -> f64 {
    assert_eq!(alpha_hat.len(), alpha.len());
    let errors = alpha_hat.iter().zip(alpha).filter(|(a, b)| a != b).count();
    errors as f64 / alpha.len() as f64
}

/// Normalized squared error of the channel estimate, or `None` for an all-zero truth.
pub fn nmse(h_hat: &crate::CMatrix, h: &crate::CMatrix) -> Option<f64> {
    assert_eq!(h_hat.dim(), h.dim());
    let den: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    if den == 0.0 {
        return None;
    }
    let num: f64 = h.iter().zip(h_hat.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
    Some(num / den)
}

pub fn compute_metrics(
    result: &DetectionResult,
    truth: &ChannelRealization,
    algorithm: &str,
    config_hash: &str,
    seed: u64,
    runtime_ms: f64,
) -> TrialMetrics {
    let ratio = nmse(&result.h_hat, &truth.h);
    let d = &result.diagnostics;
    TrialMetrics {
        algorithm: algorithm.to_string(),
        aer: activity_error_rate(&result.alpha_hat, &truth.activity.alpha),
        nmse: ratio,
        nmse_db: ratio.map(to_db),
        runtime_ms,
        config_hash: config_hash.to_string(),
        seed,
        iterations: d.stage1_iterations + d.stage2_iterations,
        clamp_events: d.clamps.total(),
        finite: result.is_finite(),
    }
}
