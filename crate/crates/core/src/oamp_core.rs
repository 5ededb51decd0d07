//! Linear-estimator / denoiser pair of the OAMP-MMV recursion and its EM
//! hyper-parameter updates.
//!
//! All routines operate on whole matrices whose columns are independent
//! measurement vectors (antennas in the spatial domain, angular bins in the
//! angular domain). Scalars indexed by column (`tau`, `gamma`, `psi`,
//! `v_tilde`, `nu_ext`) are plain `Vec<f64>`.

use ndarray::{Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::dequant::{PriorBelief, VARIANCE_FLOOR};
use crate::frontend::QuantizedFrame;
use crate::linalg::{column_norms_sq, CMatrix};
use crate::pilot::PilotMatrix;

/// `gamma` is pulled back to this fraction of `tau` when it reaches `tau`.
pub const GAMMA_CLAMP_RATIO: f64 = 0.99;

/// Number of times each safeguard fired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampCounts {
    /// Extrinsic de-quantizer variance clamped to its ceiling.
    pub nu_ext: usize,
    /// Posterior variance reached the linear-estimator variance.
    pub gamma_ge_tau: usize,
    /// Residual-based noise estimate `v` floored.
    pub v_floor: usize,
}

impl ClampCounts {
    pub fn total(&self) -> usize {
        self.nu_ext + self.gamma_ge_tau + self.v_floor
    }

    pub fn add(&mut self, other: ClampCounts) {
        self.nu_ext += other.nu_ext;
        self.gamma_ge_tau += other.gamma_ge_tau;
        self.v_floor += other.v_floor;
    }
}

/// Every message of one OAMP-MMV iteration. `N` is the number of columns.
#[derive(Debug, Clone)]
pub struct OampState {
    /// Extrinsic denoiser output, (K, N).
    pub u: CMatrix,
    pub prior: PriorBelief,
    /// Linear-estimator output, (K, N).
    pub r: CMatrix,
    pub tau: Vec<f64>,
    /// Posterior support probabilities, (K, N).
    pub pi: Array2<f64>,
    /// Posterior means, (K, N).
    pub mu: CMatrix,
    pub gamma: Vec<f64>,
    /// Prior support probabilities, (K, N).
    pub lambda: Array2<f64>,
    pub psi: Vec<f64>,
    pub sigma2: f64,
}

impl OampState {
    /// Initial state for the spatial-domain recursion on `frame`.
    ///
    /// `u = 0`, `u~ = 0`, `v~ = 1`; `sigma2` from the high-resolution energy
    /// at an assumed SNR of 100; `psi` by matching each column's energy to
    /// the prior `lambda0 psi + sigma2` per entry.
    pub fn initial(frame: &QuantizedFrame, pilot: &PilotMatrix, lambda0: f64) -> Self {
        let (m, n_r) = frame.ytilde.dim();
        let k = pilot.k();
        let sigma2 = frame.coarse_noise_level(100.0).max(VARIANCE_FLOOR);
        let energy = column_norms_sq(frame.ytilde.view());
        let psi = energy.iter().map(|&e| ((e - m as f64 * sigma2) / (lambda0 * pilot.frobenius_sq())).max(1e-6)).collect();
        Self {
            u: Array2::zeros((k, n_r)),
            prior: PriorBelief::zeros(m, n_r, 1.0),
            r: Array2::zeros((k, n_r)),
            tau: vec![1.0; n_r],
            pi: Array2::zeros((k, n_r)),
            mu: Array2::zeros((k, n_r)),
            gamma: vec![1.0; n_r],
            lambda: Array2::from_elem((k, n_r), lambda0),
            psi,
            sigma2,
        }
    }

    pub fn is_finite(&self) -> bool {
        let c = |m: &CMatrix| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        let f = |v: &[f64]| v.iter().all(|x| x.is_finite());
        c(&self.u)
            && c(&self.r)
            && c(&self.mu)
            && c(&self.prior.u_tilde)
            && f(&self.tau)
            && f(&self.gamma)
            && f(&self.psi)
            && f(&self.prior.v_tilde)
            && self.sigma2.is_finite()
            && self.pi.iter().all(|p| p.is_finite())
            && self.lambda.iter().all(|p| p.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct LeOutput {
    pub r: CMatrix,
    pub tau: Vec<f64>,
    pub v: Vec<f64>,
    pub v_floored: usize,
}

/// De-correlated linear estimator on every column:
///
/// ```text
/// v   = ||z_ext - S u||^2 / M - nu_ext          (floored)
/// r   = u + (K/M) S^H (z_ext - S u)
/// tau = ((K - M)/M) v + (K/M) nu_ext
/// ```
pub fn le_step(z_ext: &CMatrix, nu_ext: &[f64], pilot: &PilotMatrix, u: &CMatrix) -> LeOutput {
    let m = pilot.m() as f64;
    let k = pilot.k() as f64;
    let resid = z_ext - &pilot.apply(u.view());
    let mut v_floored = 0;
    let v: Vec<f64> = column_norms_sq(resid.view())
        .into_iter()
        .zip(nu_ext)
        .map(|(e, &nu)| {
            let v = e / m - nu;
            if v < VARIANCE_FLOOR {
                v_floored += 1;
                VARIANCE_FLOOR
            } else {
                v
            }
        })
        .collect();
    let mut r = pilot.apply_adjoint(resid.view());
    r.mapv_inplace(|x| x * (k / m));
    r += u;
    let tau = v.iter().zip(nu_ext).map(|(&v, &nu)| (k - m) / m * v + k / m * nu).collect();
    LeOutput { r, tau, v, v_floored }
}

/// Posterior probability that an entry with observation `r` (noise variance
/// `tau`) was drawn from the slab `CN(0, psi)` of a spike-and-slab prior with
/// weight `lambda`.
pub fn posterior_support(r_abs2: f64, tau: f64, lambda: f64, psi: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda >= 1.0 {
        return 1.0;
    }
    let logit = lambda.ln() - (-lambda).ln_1p() + tau.ln() - (tau + psi).ln() + psi * r_abs2 / (tau * (tau + psi));
    if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct Denoised {
    pub pi: Array2<f64>,
    pub mu: CMatrix,
    pub gamma: Vec<f64>,
}

/// Spike-and-slab MMSE denoiser applied column-wise.
///
/// `row_mask`, when given, multiplies each row's support probability (rows
/// with mask 0 are forced to zero). `canonical_gamma` switches the
/// posterior-variance average from `(1 - pi)|mu|^2` to `pi(1 - pi)|m|^2`
/// with `m` the slab posterior mean.
pub fn denoise(r: &CMatrix, tau: &[f64], lambda: &Array2<f64>, psi: &[f64], row_mask: Option<&[u8]>, canonical_gamma: bool) -> Denoised {
    let (k, n) = r.dim();
    let mut pi = Array2::zeros((k, n));
    let mut mu = Array2::zeros((k, n));
    let mut gamma = Vec::with_capacity(n);
    for j in 0..n {
        let (t, p) = (tau[j], psi[j]);
        let shrink = p / (t + p);
        let slab_var = t * p / (t + p);
        let mut acc = 0.0;
        for i in 0..k {
            let rv = r[[i, j]];
            let mut prob = posterior_support(rv.norm_sqr(), t, lambda[[i, j]], p);
            if let Some(mask) = row_mask {
                prob *= mask[i] as f64;
            }
            let slab_mean = rv * shrink;
            let mean = slab_mean * prob;
            pi[[i, j]] = prob;
            mu[[i, j]] = mean;
            acc +=
                prob * slab_var + if canonical_gamma { prob * (1.0 - prob) * slab_mean.norm_sqr() } else { (1.0 - prob) * mean.norm_sqr() };
        }
        gamma.push((acc / k as f64).max(VARIANCE_FLOOR));
    }
    Denoised { pi, mu, gamma }
}

/// Posterior probability that a whole row is nonzero, given every column's
/// observation `r` and a prior row probability `prior`. Under the active
/// hypothesis each entry follows the spike-and-slab prior with weight
/// `lambda`; under the inactive one every entry is zero.
pub fn row_activity_posterior(r: &CMatrix, tau: &[f64], lambda: &Array2<f64>, psi: &[f64], prior: f64) -> Vec<f64> {
    let prior_logit = prior.ln() - (-prior).ln_1p();
    r.rows()
        .into_iter()
        .zip(lambda.rows())
        .map(|(row, lam)| {
            let mut llr = prior_logit;
            for (j, (z, &l)) in row.iter().zip(lam.iter()).enumerate() {
                let (t, p) = (tau[j], psi[j]);
                // log of the slab-to-spike likelihood ratio
                let slab = (t / (t + p)).ln() + p * z.norm_sqr() / (t * (t + p));
                let l = l.clamp(0.0, 1.0);
                llr += if slab > 0.0 { slab + ((1.0 - l) * (-slab).exp() + l).ln() } else { (1.0 - l + l * slab.exp()).ln() };
            }
            if llr >= 0.0 {
                1.0 / (1.0 + (-llr).exp())
            } else {
                let e = llr.exp();
                e / (1.0 + e)
            }
        })
        .collect()
}

/// Enforces `gamma < tau` ahead of the precision subtractions. Returns the
/// number of columns clamped.
pub fn clamp_gamma(gamma: &mut [f64], tau: &[f64]) -> usize {
    let mut clamped = 0;
    for (g, &t) in gamma.iter_mut().zip(tau) {
        if *g >= t {
            *g = GAMMA_CLAMP_RATIO * t;
            clamped += 1;
        }
    }
    clamped
}

/// Extrinsic denoiser output with damping:
/// `u = (1 - eps) (tau gamma / (tau - gamma)) (mu/gamma - r/tau) + eps u_prev`.
pub fn extrinsic_u(mu: &CMatrix, gamma: &[f64], r: &CMatrix, tau: &[f64], u_prev: &CMatrix, epsilon: f64) -> CMatrix {
    let mut u = Array2::zeros(mu.dim());
    for (j, (((mut uc, mc), rc), pc)) in
        u.axis_iter_mut(Axis(1)).zip(mu.axis_iter(Axis(1))).zip(r.axis_iter(Axis(1))).zip(u_prev.axis_iter(Axis(1))).enumerate()
    {
        let (t, g) = (tau[j], gamma[j]);
        let c = t * g / (t - g);
        Zip::from(&mut uc).and(&mc).and(&rc).and(&pc).for_each(|u, &m, &r, &p| {
            let raw = (m / g - r / t) * c;
            *u = raw * (1.0 - epsilon) + p * epsilon;
        });
    }
    u
}

/// Slab-variance EM update per column.
///
/// Default: `psi = sum_k pi (tau psi/(tau+psi) + |psi r/(tau+psi)|^2) / sum_k pi`
/// with the previous `psi`. With `verbatim`, the variant
/// `sum_k [tau_prev psi/(tau+psi) + |pi r/(tau+psi)|^2] / sum_k pi` is used
/// instead (previous `psi` substituted on the right-hand side).
/// Columns with `sum_k pi < 1e-12` keep their previous value.
pub fn update_psi(pi: &Array2<f64>, r: &CMatrix, tau: &[f64], psi_prev: &[f64], tau_prev: &[f64], verbatim: bool) -> Vec<f64> {
    let k = r.nrows();
    (0..r.ncols())
        .map(|j| {
            let (t, p) = (tau[j], psi_prev[j]);
            let weight: f64 = pi.column(j).sum();
            if weight < 1e-12 {
                return p;
            }
            let mut acc = 0.0;
            for i in 0..k {
                let pr = pi[[i, j]];
                let rv = r[[i, j]];
                acc += if verbatim {
                    tau_prev[j] * p / (t + p) + (rv * pr / (t + p)).norm_sqr()
                } else {
                    pr * (t * p / (t + p) + (rv * (p / (t + p))).norm_sqr())
                };
            }
            (acc / weight).max(VARIANCE_FLOOR)
        })
        .collect()
}

/// Antennas whose support probabilities are averaged: every antenna when the
/// previous noise estimate is at or above the low-SNR threshold, otherwise
/// only the high-resolution ones.
pub fn support_antennas(sigma2_prev: f64, threshold: f64, hi_set: &[usize], n_r: usize) -> Vec<usize> {
    if sigma2_prev >= threshold || hi_set.is_empty() {
        (0..n_r).collect()
    } else {
        hi_set.to_vec()
    }
}

/// Common-support sparsity update: each row's support probability averaged
/// over `cols`, broadcast to every column.
pub fn update_lambda_common(pi: &Array2<f64>, cols: &[usize]) -> Array2<f64> {
    let (k, n) = pi.dim();
    let mut lambda = Array2::zeros((k, n));
    for i in 0..k {
        let mean = cols.iter().map(|&j| pi[[i, j]]).sum::<f64>() / cols.len() as f64;
        lambda.row_mut(i).fill(mean);
    }
    lambda
}

/// Noise-variance EM update over the reference antennas:
/// `(1/|R|) sum_{n in R} (||Y~_n - S mu_n||^2 / M + gamma_n)`.
pub fn update_sigma2(ytilde: &CMatrix, pilot: &PilotMatrix, mu: &CMatrix, gamma: &[f64], ref_set: &[usize]) -> f64 {
    let m = pilot.m() as f64;
    let mu_ref = mu.select(Axis(1), ref_set);
    let y_ref = ytilde.select(Axis(1), ref_set);
    let resid = y_ref - pilot.apply(mu_ref.view());
    let total: f64 = column_norms_sq(resid.view()).iter().zip(ref_set).map(|(&e, &n)| e / m + gamma[n]).sum();
    (total / ref_set.len() as f64).max(VARIANCE_FLOOR)
}

/// Projects the extrinsic denoiser output back onto `Z = S H`:
/// `u~ = S u`, `1/v~ = 1/gamma - 1/tau`, then `v~` damped against `v_prev`.
pub fn project(u: &CMatrix, pilot: &PilotMatrix, gamma: &[f64], tau: &[f64], v_prev: &[f64], epsilon: f64) -> PriorBelief {
    let u_tilde = pilot.apply(u.view());
    let v_tilde = gamma
        .iter()
        .zip(tau)
        .zip(v_prev)
        .map(|((&g, &t), &vp)| {
            let fresh = g * t / (t - g);
            ((1.0 - epsilon) * fresh + epsilon * vp).max(VARIANCE_FLOOR)
        })
        .collect();
    PriorBelief { u_tilde, v_tilde }
}

/// Relative change `||a - b||_F / ||b||_F`; 1 when `b` is zero and `a` is not.
pub fn relative_change(a: &CMatrix, b: &CMatrix) -> f64 {
    let num: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        (num / den).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{herm, matmul, max_abs_diff, C64};
    use crate::pilot::make_pilot;
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = stream_rng(seed, Stream::Noise);
        Array2::from_shape_fn((rows, cols), |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn le_fixed_point_and_matched_filter() {
        let s = make_pilot(8, 16, &mut stream_rng(1, Stream::Pilot)).unwrap();
        let u = random_matrix(16, 3, 2);
        let z = s.apply(u.view());
        let eps = 1e-3;
        let out = le_step(&z, &[eps; 3], &s, &u);
        assert!(max_abs_diff(out.r.view(), u.view()) < 1e-12);
        assert!(out.v.iter().all(|&v| v == VARIANCE_FLOOR));
        assert_eq!(out.v_floored, 3);
        for &t in &out.tau {
            assert!((t - 2.0 * eps).abs() < 1e-10);
        }
        let zero = Array2::zeros((16, 3));
        let out = le_step(&z, &[0.1; 3], &s, &zero);
        let mf = s.apply_adjoint(z.view()).mapv(|x| x * 2.0);
        assert!(max_abs_diff(out.r.view(), mf.view()) < 1e-12);
    }

    #[test]
    fn le_matches_straight_line_evaluation() {
        let s = make_pilot(8, 16, &mut stream_rng(3, Stream::Pilot)).unwrap();
        let sd = s.dense();
        let sh = herm(sd.view());
        let u = random_matrix(16, 4, 4);
        let z = random_matrix(8, 4, 5);
        let nu = [0.01, 0.02, 0.03, 0.04];
        let out = le_step(&z, &nu, &s, &u);
        for j in 0..4 {
            let mut resid = [C64::new(0.0, 0.0); 8];
            for i in 0..8 {
                let mut acc = C64::new(0.0, 0.0);
                for kk in 0..16 {
                    acc += sd[[i, kk]] * u[[kk, j]];
                }
                resid[i] = z[[i, j]] - acc;
            }
            let v = (resid.iter().map(|x| x.norm_sqr()).sum::<f64>() / 8.0 - nu[j]).max(VARIANCE_FLOOR);
            assert!((out.v[j] - v).abs() < 1e-12);
            assert!((out.tau[j] - (v + 2.0 * nu[j])).abs() < 1e-12);
            for kk in 0..16 {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..8 {
                    acc += sh[[kk, i]] * resid[i];
                }
                let want = u[[kk, j]] + acc * 2.0;
                assert!((out.r[[kk, j]] - want).norm() < 1e-12);
            }
        }
        let _ = matmul(sd.view(), u.view());
    }

    #[test]
    fn denoiser_limits() {
        let r = Array2::from_elem((3, 1), C64::new(1.2, -0.3));
        let zero = denoise(&r, &[0.5], &Array2::zeros((3, 1)), &[1.0], None, false);
        assert!(zero.pi.iter().all(|&p| p == 0.0));
        assert!(zero.mu.iter().all(|m| m.norm() == 0.0));
        let one = denoise(&r, &[0.5], &Array2::ones((3, 1)), &[1.0], None, false);
        assert!(one.pi.iter().all(|&p| p == 1.0));
        let want = C64::new(1.2, -0.3) * (1.0 / 1.5);
        assert!(one.mu.iter().all(|m| (m - want).norm() < 1e-15));
        let masked = denoise(&r, &[0.5], &Array2::ones((3, 1)), &[1.0], Some(&[1, 0, 1]), false);
        assert_eq!(masked.pi[[1, 0]], 0.0);
        assert_eq!(masked.mu[[1, 0]], C64::new(0.0, 0.0));
    }

    #[test]
    fn support_probability_is_monotone_in_magnitude() {
        let mut prev = 0.0;
        for i in 0..200 {
            let r2 = i as f64 * 0.05;
            let p = posterior_support(r2, 0.3, 0.1, 2.0);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn gamma_variants() {
        let r = Array2::from_shape_vec((2, 1), vec![C64::new(2.0, 0.0), C64::new(0.1, 0.0)]).unwrap();
        let lam = Array2::from_elem((2, 1), 0.3);
        let plain = denoise(&r, &[0.5], &lam, &[1.0], None, false);
        let canon = denoise(&r, &[0.5], &lam, &[1.0], None, true);
        let mut want_p = 0.0;
        let mut want_c = 0.0;
        for i in 0..2 {
            let p = plain.pi[[i, 0]];
            let m = r[[i, 0]] * (1.0 / 1.5);
            want_p += p / 3.0 + (1.0 - p) * (m * p).norm_sqr();
            want_c += p / 3.0 + p * (1.0 - p) * m.norm_sqr();
        }
        assert!((plain.gamma[0] - want_p / 2.0).abs() < 1e-15);
        assert!((canon.gamma[0] - want_c / 2.0).abs() < 1e-15);
    }

    #[test]
    fn extrinsic_u_identities() {
        let r = random_matrix(4, 2, 7);
        let prev = random_matrix(4, 2, 8);
        let tau = [0.5, 0.8];
        let gamma = [0.2, 0.3];
        let mu = Array2::from_shape_fn((4, 2), |(i, j)| r[[i, j]] * (gamma[j] / tau[j]));
        let u = extrinsic_u(&mu, &gamma, &r, &tau, &prev, 0.0);
        assert!(u.iter().all(|x| x.norm() < 1e-14));
        let frozen = extrinsic_u(&random_matrix(4, 2, 9), &gamma, &r, &tau, &prev, 1.0);
        assert!(max_abs_diff(frozen.view(), prev.view()) < 1e-15);
        let mu2 = random_matrix(4, 2, 10);
        let raw = extrinsic_u(&mu2, &gamma, &r, &tau, &prev, 0.0);
        let want = (mu2[[1, 1]] / 0.3 - r[[1, 1]] / 0.8) * (0.8 * 0.3 / 0.5);
        assert!((raw[[1, 1]] - want).norm() < 1e-14);
    }

    #[test]
    fn gamma_clamp_counts() {
        let mut g = vec![0.1, 0.6, 0.5];
        assert_eq!(clamp_gamma(&mut g, &[0.5, 0.5, 0.5]), 2);
        assert_eq!(g, vec![0.1, 0.495, 0.495]);
    }

    #[test]
    fn psi_em_limit_is_second_moment() {
        let r = random_matrix(6, 1, 11);
        let pi = Array2::ones((6, 1));
        let psi = update_psi(&pi, &r, &[1e-12], &[3.0], &[1e-12], false);
        let m2 = r.iter().map(|z| z.norm_sqr()).sum::<f64>() / 6.0;
        assert!((psi[0] - m2).abs() < 1e-9);
        let none = update_psi(&Array2::zeros((6, 1)), &r, &[0.1], &[3.0], &[0.1], false);
        assert_eq!(none[0], 3.0);
    }

    #[test]
    fn sigma2_perfect_fit_is_zero() {
        let s = make_pilot(8, 16, &mut stream_rng(12, Stream::Pilot)).unwrap();
        let mu = random_matrix(16, 3, 13);
        let y = s.apply(mu.view());
        let est = update_sigma2(&y, &s, &mu, &[0.0, 0.0, 0.0], &[0, 2]);
        assert!(est <= 1e-12);
    }

    #[test]
    fn projection_algebra() {
        let s = make_pilot(4, 8, &mut stream_rng(14, Stream::Pilot)).unwrap();
        let zero = Array2::zeros((8, 2));
        let p = project(&zero, &s, &[0.25, 0.5], &[0.5, 1.0], &[9.0, 9.0], 0.0);
        assert!(p.u_tilde.iter().all(|z| z.norm() == 0.0));
        assert!((p.v_tilde[0] - 0.5).abs() < 1e-15 && (p.v_tilde[1] - 1.0).abs() < 1e-15);
        let frozen = project(&zero, &s, &[0.25, 0.5], &[0.5, 1.0], &[9.0, 7.0], 1.0);
        assert_eq!(frozen.v_tilde, vec![9.0, 7.0]);
    }

    #[test]
    fn common_lambda_and_support_selection() {
        let pi = Array2::from_shape_vec((2, 4), vec![1.0, 0.0, 1.0, 0.0, 0.2, 0.4, 0.6, 0.8]).unwrap();
        let lam = update_lambda_common(&pi, &[0, 2]);
        assert!(lam.row(0).iter().all(|&v| v == 1.0));
        assert!(lam.row(1).iter().all(|&v| (v - 0.4).abs() < 1e-15));
        assert_eq!(support_antennas(1.0, 0.5, &[1, 3], 4), vec![0, 1, 2, 3]);
        assert_eq!(support_antennas(0.1, 0.5, &[1, 3], 4), vec![1, 3]);
        assert_eq!(support_antennas(0.1, 0.5, &[], 4), vec![0, 1, 2, 3]);
    }
}
