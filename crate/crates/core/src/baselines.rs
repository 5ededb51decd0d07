//! Reference detectors: simultaneous OMP on the raw mixed-resolution
//! observation, and a single-stage OAMP-MMV on the full-array angular
//! dictionary with the de-quantizer in the loop.

use ndarray::{Array2, Axis};

use crate::config::SystemConfig;
use crate::dequant::{dequantize, PriorBelief};
use crate::error::Result;
use crate::frontend::QuantizedFrame;
use crate::linalg::{frobenius_sq, CMatrix, C64};
use crate::oamp_core::{
    clamp_gamma, denoise, extrinsic_u, le_step, project, relative_change, row_activity_posterior, update_psi, update_sigma2, ClampCounts,
    OampState,
};
use crate::pilot::PilotMatrix;
use crate::tsoamp::{detect_activity, neighbor_lambda, DetectionResult, Diagnostics, IterationRecord, Stage, SubarrayDictionary};

/// Relative pivot below which a selected sub-dictionary counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// In-place Cholesky `A = L L^H` of a Hermitian matrix. Returns `None` when
/// a pivot falls below `RANK_TOL` times the largest diagonal entry.
fn cholesky(a: &CMatrix) -> Option<CMatrix> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[[i, i]].re).fold(0.0, f64::max);
    let mut l = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]].re;
        for p in 0..j {
            d -= l[[j, p]].norm_sqr();
        }
        if d <= RANK_TOL * scale {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]].conj();
            }
            l[[i, j]] = s / d;
        }
    }
    Some(l)
}

/// Solves `L L^H X = B` column by column.
fn cholesky_solve(l: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = l.nrows();
    let mut x = b.clone();
    for mut col in x.axis_iter_mut(Axis(1)) {
        for i in 0..n {
            let mut s = col[i];
            for p in 0..i {
                s -= l[[i, p]] * col[p];
            }
            col[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for p in i + 1..n {
                s -= l[[p, i]].conj() * col[p];
            }
            col[i] = s / l[[i, i]];
        }
    }
    x
}

/// Simultaneous orthogonal matching pursuit over all antennas.
///
/// Picks the device whose pilot correlates most with the residual (row norm
/// of `S^H R`), re-fits every selected row by least squares, and stops once
/// the residual energy drops to `M N_r sigma2_hat` or `2 K_a` devices are
/// selected. `sigma2_hat` is the coarse noise level of the reference columns.
pub fn swomp(frame: &QuantizedFrame, pilot: &PilotMatrix, cfg: &SystemConfig) -> DetectionResult {
    let (m, n_r) = frame.ytilde.dim();
    let k = pilot.k();
    let y = &frame.ytilde;
    let threshold = m as f64 * n_r as f64 * frame.coarse_noise_level(100.0);
    let cap = (2 * cfg.k_a).min(k).min(m);
    let columns: Vec<Vec<C64>> = (0..k).map(|j| pilot.column(j)).collect();

    let mut support: Vec<usize> = Vec::new();
    let mut coef: CMatrix = Array2::zeros((0, n_r));
    let mut resid = y.clone();
    let mut iterations = 0;
    while support.len() < cap && frobenius_sq(resid.view()) > threshold {
        iterations += 1;
        let corr = pilot.apply_adjoint(resid.view());
        let best = (0..k)
            .filter(|j| !support.contains(j))
            .map(|j| (j, corr.row(j).iter().map(|z| z.norm_sqr()).sum::<f64>()))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((pick, _)) = best else { break };
        let mut trial = support.clone();
        trial.push(pick);
        let s = trial.len();
        let gram = Array2::from_shape_fn((s, s), |(a, b)| {
            columns[trial[a]].iter().zip(&columns[trial[b]]).map(|(x, y)| x.conj() * y).sum::<C64>()
        });
        let Some(l) = cholesky(&gram) else {
            log::debug!("swomp: device {pick} makes the support rank deficient");
            break;
        };
        let rhs =
            Array2::from_shape_fn((s, n_r), |(a, n)| columns[trial[a]].iter().zip(y.column(n)).map(|(x, y)| x.conj() * y).sum::<C64>());
        coef = cholesky_solve(&l, &rhs);
        support = trial;
        resid = y.clone();
        for (a, &j) in support.iter().enumerate() {
            for mm in 0..m {
                let sj = columns[j][mm];
                for n in 0..n_r {
                    resid[[mm, n]] -= sj * coef[[a, n]];
                }
            }
        }
    }

    let mut alpha_hat = vec![0u8; k];
    let mut h_hat = Array2::zeros((k, n_r));
    for (a, &j) in support.iter().enumerate() {
        alpha_hat[j] = 1;
        h_hat.row_mut(j).assign(&coef.row(a).mapv(|z| z / frame.agc_gain));
    }
    DetectionResult {
        lambda_final: alpha_hat.iter().map(|&a| a as f64).collect(),
        alpha_hat,
        x_hat: None,
        h_hat,
        diagnostics: Diagnostics { stage1_iterations: iterations, agc_warning: frame.agc_warning, ..Diagnostics::default() },
    }
}

/// Single-stage OAMP-MMV on the full-array angular dictionary.
///
/// Each iteration de-quantizes in the spatial domain (prior `S U D^H` with
/// the per-antenna average of the angular variances), moves the extrinsic
/// observation to the angular domain, and runs the linear/denoiser pair with
/// the neighbour-averaged prior. A device is declared active when the
/// posterior probability that its angular row is nonzero, given the last
/// linear-estimator output and the initial per-bin sparsity, is at least 0.5.
pub fn oamp_mmv_single(frame: &QuantizedFrame, pilot: &PilotMatrix, cfg: &SystemConfig) -> Result<DetectionResult> {
    let dict = SubarrayDictionary::new(cfg.n_r, cfg.g_r, 1)?;
    let (m, _) = frame.ytilde.dim();
    let k = pilot.k();
    let g_r = cfg.g_r;
    let eps = cfg.epsilon;
    let reference = frame.reference_set();
    let init = OampState::initial(frame, pilot, cfg.lambda0());

    let mut sigma2 = init.sigma2;
    let mut psi = dict.angular_variance(&init.psi);
    let mut tau_prev = vec![1.0; g_r];
    let mut u: CMatrix = Array2::zeros((k, g_r));
    let mut mu: CMatrix = Array2::zeros((k, g_r));
    let mut prior_ang = PriorBelief::zeros(m, g_r, 1.0);
    let mut lambda = Array2::from_elem((k, g_r), cfg.lambda0());
    let mut lambda_final = vec![cfg.lambda0(); k];
    let flat_prior = Array2::from_elem((k, g_r), cfg.lambda0());
    let mut clamps = ClampCounts::default();
    let mut records = Vec::new();
    let mut sigma2_trajectory = Vec::new();
    let mut iterations = 0;

    for t in 1..=cfg.t1 + cfg.t2 {
        let mut step = ClampCounts::default();
        let prior_sp =
            PriorBelief { u_tilde: dict.synthesize(prior_ang.u_tilde.view()), v_tilde: dict.spatial_variance(&prior_ang.v_tilde) };
        let pass = dequantize(frame, &prior_sp, sigma2);
        step.nu_ext = pass.clamps;
        let z = dict.analyze(pass.belief.z_ext.view());
        let nu = dict.angular_variance(&pass.belief.nu_ext);

        let le = le_step(&z, &nu, pilot, &u);
        step.v_floor = le.v_floored;
        let mut den = denoise(&le.r, &le.tau, &lambda, &psi, None, cfg.canonical_gamma);
        lambda_final = row_activity_posterior(&le.r, &le.tau, &flat_prior, &psi, cfg.lambda0());
        step.gamma_ge_tau = clamp_gamma(&mut den.gamma, &le.tau);
        u = extrinsic_u(&den.mu, &den.gamma, &le.r, &le.tau, &u, eps);
        psi = update_psi(&den.pi, &le.r, &le.tau, &psi, &tau_prev, cfg.verbatim_line19);
        lambda = neighbor_lambda(&den.pi, &dict);
        let mu_sp = dict.synthesize(den.mu.view());
        sigma2 = update_sigma2(&frame.ytilde, pilot, &mu_sp, &dict.spatial_variance(&den.gamma), &reference);
        prior_ang = project(&u, pilot, &den.gamma, &le.tau, &prior_ang.v_tilde, eps);

        let delta = relative_change(&den.mu, &mu);
        mu = den.mu;
        clamps.add(step);
        iterations = t;
        sigma2_trajectory.push(sigma2);
        records.push(IterationRecord {
            stage: Stage::Joint,
            t,
            sigma2,
            tau_mean: le.tau.iter().sum::<f64>() / g_r as f64,
            gamma_mean: den.gamma.iter().sum::<f64>() / g_r as f64,
            delta_mu: delta,
            clamps: step,
        });
        tau_prev = le.tau;
        if delta < cfg.early_stop_tol {
            break;
        }
    }

    let alpha_hat = detect_activity(&lambda_final);
    let h_hat = dict.synthesize(mu.view()).mapv(|z| z / frame.agc_gain);
    Ok(DetectionResult {
        alpha_hat,
        x_hat: Some(mu),
        h_hat,
        lambda_final,
        diagnostics: Diagnostics {
            stage1_iterations: iterations,
            stage2_iterations: 0,
            clamps,
            sigma2_trajectory,
            agc_warning: frame.agc_warning,
            records,
        },
    })
}
