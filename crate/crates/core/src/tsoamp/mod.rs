//! Two-stage OAMP detector.
//!
//! Stage 1 alternates the de-quantizer with the spatial-domain OAMP-MMV
//! recursion, learning a support probability per device that is shared by
//! all antennas. Devices whose final probability reaches 0.5 are declared
//! active. Stage 2 moves the extrinsic observation to the subarray angular
//! domain and re-runs the linear/denoiser pair with the support restricted
//! to the detected devices and a neighbour-averaged (clustered) sparsity
//! prior.

mod dictionary;
mod result;

pub use dictionary::SubarrayDictionary;
pub use result::{DetectionResult, Diagnostics, IterationRecord, Stage};

use ndarray::Array2;

use crate::config::SystemConfig;
use crate::dequant::{dequantize, DequantBelief};
use crate::error::Result;
use crate::frontend::QuantizedFrame;
use crate::linalg::{CMatrix, C64};
use crate::oamp_core::{
    clamp_gamma, denoise, extrinsic_u, le_step, project, relative_change, support_antennas, update_lambda_common, update_psi,
    update_sigma2, ClampCounts, OampState,
};
use crate::pilot::PilotMatrix;

/// Everything Stage 2 needs from Stage 1.
#[derive(Debug, Clone)]
pub struct Stage1Output {
    pub state: OampState,
    pub belief: DequantBelief,
    pub lambda0: f64,
    pub iterations: usize,
    pub clamps: ClampCounts,
    pub records: Vec<IterationRecord>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Spatial-domain de-quantization plus OAMP-MMV with EM learning.
pub fn stage1(frame: &QuantizedFrame, pilot: &PilotMatrix, cfg: &SystemConfig) -> Stage1Output {
    let n_r = frame.n_r();
    let lambda0 = cfg.lambda0();
    let eps = cfg.epsilon;
    let reference = frame.reference_set();
    let sigma2_th = frame.coarse_noise_level(cfg.snr_th);
    let mut state = OampState::initial(frame, pilot, lambda0);
    let mut belief = DequantBelief { z_ext: Array2::zeros(frame.ytilde.dim()), nu_ext: vec![state.sigma2; n_r] };
    let mut clamps = ClampCounts::default();
    let mut records = Vec::with_capacity(cfg.t1);
    let mut iterations = 0;

    for t in 1..=cfg.t1 {
        let mut step = ClampCounts::default();
        let pass = dequantize(frame, &state.prior, state.sigma2);
        step.nu_ext = pass.clamps;
        belief = pass.belief;

        let le = le_step(&belief.z_ext, &belief.nu_ext, pilot, &state.u);
        step.v_floor = le.v_floored;
        let mut den = denoise(&le.r, &le.tau, &state.lambda, &state.psi, None, cfg.canonical_gamma);
        step.gamma_ge_tau = clamp_gamma(&mut den.gamma, &le.tau);

        let u = extrinsic_u(&den.mu, &den.gamma, &le.r, &le.tau, &state.u, eps);
        let psi = update_psi(&den.pi, &le.r, &le.tau, &state.psi, &state.tau, cfg.verbatim_line19);
        let lambda = if cfg.common_support {
            update_lambda_common(&den.pi, &support_antennas(state.sigma2, sigma2_th, &frame.hi_set, n_r))
        } else {
            den.pi.clone()
        };
        let sigma2 = update_sigma2(&frame.ytilde, pilot, &den.mu, &den.gamma, &reference);
        let prior = project(&u, pilot, &den.gamma, &le.tau, &state.prior.v_tilde, eps);
        let delta = relative_change(&den.mu, &state.mu);

        state = OampState { u, prior, r: le.r, tau: le.tau, pi: den.pi, mu: den.mu, gamma: den.gamma, lambda, psi, sigma2 };
        clamps.add(step);
        iterations = t;
        records.push(IterationRecord {
            stage: Stage::One,
            t,
            sigma2,
            tau_mean: mean(&state.tau),
            gamma_mean: mean(&state.gamma),
            delta_mu: delta,
            clamps: step,
        });
        if step.total() > 0 {
            log::debug!("stage 1 iteration {t}: clamps {step:?}");
        }
        if delta < cfg.early_stop_tol {
            break;
        }
    }
    Stage1Output { state, belief, lambda0, iterations, clamps, records }
}

/// Device-level support probabilities read off the final prior: the last
/// antenna's column.
pub fn final_support(lambda: &Array2<f64>) -> Vec<f64> {
    let last = lambda.ncols() - 1;
    lambda.column(last).to_vec()
}

/// `alpha_k = 1` iff `lambda_k >= 0.5`.
pub fn detect_activity(lambda_final: &[f64]) -> Vec<u8> {
    lambda_final.iter().map(|&l| (l >= 0.5) as u8).collect()
}

/// Clustered-sparsity prior: each angular bin takes the mean support
/// probability of its immediate neighbours inside the same subarray.
pub fn neighbor_lambda(pi: &Array2<f64>, dict: &SubarrayDictionary) -> Array2<f64> {
    let (k, g_r) = pi.dim();
    let bc = dict.block_cols();
    let mut lambda = Array2::zeros((k, g_r));
    for n in 0..g_r {
        let lo = dict.block_of_column(n) * bc;
        let hi = lo + bc;
        let neighbours: Vec<usize> = [n.checked_sub(1), Some(n + 1)].into_iter().flatten().filter(|&j| j >= lo && j < hi).collect();
        if neighbours.is_empty() {
            for i in 0..k {
                lambda[[i, n]] = pi[[i, n]];
            }
            continue;
        }
        for i in 0..k {
            lambda[[i, n]] = neighbours.iter().map(|&j| pi[[i, j]]).sum::<f64>() / neighbours.len() as f64;
        }
    }
    lambda
}

pub struct Stage2Output {
    pub x_hat: CMatrix,
    pub iterations: usize,
    pub clamps: ClampCounts,
    pub records: Vec<IterationRecord>,
}

/// Angular-domain estimation on the fixed Stage-1 extrinsic observation.
pub fn stage2(s1: &Stage1Output, alpha_hat: &[u8], dict: &SubarrayDictionary, pilot: &PilotMatrix, cfg: &SystemConfig) -> Stage2Output {
    let eps = cfg.epsilon;
    let k = pilot.k();
    let z = dict.analyze(s1.belief.z_ext.view());
    let nu = dict.angular_variance(&s1.belief.nu_ext);
    let mut u = dict.analyze(s1.state.u.view());
    let mut psi = dict.angular_variance(&s1.state.psi);
    let mut tau_prev = dict.angular_variance(&s1.state.tau);
    let mut lambda = Array2::from_elem((k, dict.g_r()), s1.lambda0);
    let mut mu = dict.analyze(s1.state.mu.view());
    for (mut row, &a) in mu.rows_mut().into_iter().zip(alpha_hat) {
        if a == 0 {
            row.fill(C64::new(0.0, 0.0));
        }
    }
    let mut clamps = ClampCounts::default();
    let mut records = Vec::with_capacity(cfg.t2);
    let mut iterations = 0;

    for t in 1..=cfg.t2 {
        let mut step = ClampCounts::default();
        let le = le_step(&z, &nu, pilot, &u);
        step.v_floor = le.v_floored;
        let mut den = denoise(&le.r, &le.tau, &lambda, &psi, Some(alpha_hat), cfg.canonical_gamma);
        step.gamma_ge_tau = clamp_gamma(&mut den.gamma, &le.tau);
        u = extrinsic_u(&den.mu, &den.gamma, &le.r, &le.tau, &u, eps);
        psi = update_psi(&den.pi, &le.r, &le.tau, &psi, &tau_prev, cfg.verbatim_line19);
        lambda = neighbor_lambda(&den.pi, dict);
        let delta = relative_change(&den.mu, &mu);
        mu = den.mu;
        clamps.add(step);
        iterations = t;
        records.push(IterationRecord {
            stage: Stage::Two,
            t,
            sigma2: s1.state.sigma2,
            tau_mean: mean(&le.tau),
            gamma_mean: mean(&den.gamma),
            delta_mu: delta,
            clamps: step,
        });
        tau_prev = le.tau;
        if delta < cfg.early_stop_tol {
            break;
        }
    }
    Stage2Output { x_hat: mu, iterations, clamps, records }
}

/// `H = X D_sub^H / g`.
pub fn reconstruct_h(x_hat: &CMatrix, dict: &SubarrayDictionary, agc_gain: f64) -> CMatrix {
    dict.synthesize(x_hat.view()).mapv(|z| z / agc_gain)
}

/// Full two-stage detector on one frame.
pub fn run(frame: &QuantizedFrame, pilot: &PilotMatrix, cfg: &SystemConfig) -> Result<DetectionResult> {
    let dict = SubarrayDictionary::new(cfg.n_r, cfg.g_r, cfg.n_sub)?;
    let s1 = stage1(frame, pilot, cfg);
    let lambda_final = final_support(&s1.state.lambda);
    let alpha_hat = detect_activity(&lambda_final);
    let s2 = stage2(&s1, &alpha_hat, &dict, pilot, cfg);
    let h_hat = reconstruct_h(&s2.x_hat, &dict, frame.agc_gain);

    let mut clamps = s1.clamps;
    clamps.add(s2.clamps);
    let sigma2_trajectory = s1.records.iter().map(|r| r.sigma2).collect();
    let mut records = s1.records;
    records.extend(s2.records);
    Ok(DetectionResult {
        alpha_hat,
        x_hat: Some(s2.x_hat),
        h_hat,
        lambda_final,
        diagnostics: Diagnostics {
            stage1_iterations: s1.iterations,
            stage2_iterations: s2.iterations,
            clamps,
            sigma2_trajectory,
            agc_warning: frame.agc_warning,
            records,
        },
    })
}
