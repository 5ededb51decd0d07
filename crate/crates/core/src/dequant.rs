//! Element-wise MMSE de-quantization of the low-resolution antennas and the
//! extrinsic message handed to the linear estimator.
//!
//! Each real component is modelled as `y = z + w` with prior
//! `z ~ N(u, v/2)`, noise `w ~ N(0, sigma2/2)` and the observation reduced
//! to the quantizer bin containing `y`. The posterior of `z` given the bin
//! is a Gaussian truncated through the noise, whose first two moments need
//! the ratios `(phi(eta) - phi(xi)) / (Phi(eta) - Phi(xi))` and
//! `(eta phi(eta) - xi phi(xi)) / (Phi(eta) - Phi(xi))`. Both are evaluated
//! in log space whenever `eta` and `xi` share a sign, where the plain
//! difference of CDFs underflows or cancels.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::frontend::{QuantizedFrame, QuantizerSpec};
use crate::linalg::{CMatrix, C64};
use crate::par;

/// Floor applied to every posterior and extrinsic variance.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Ceiling on the extrinsic variance when the precision subtraction fails.
pub const NU_EXT_CEILING: f64 = 1e6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Extrinsic belief about `Z = S H` leaving the de-quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct DequantBelief {
    /// Shape (M, N_r).
    pub z_ext: CMatrix,
    /// One variance per antenna.
    pub nu_ext: Vec<f64>,
}

/// Prior on `Z` fed back by the linear module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorBelief {
    /// Shape (M, N_r).
    pub u_tilde: CMatrix,
    pub v_tilde: Vec<f64>,
}

impl PriorBelief {
    pub fn zeros(m: usize, n: usize, v0: f64) -> Self {
        Self { u_tilde: Array2::zeros((m, n)), v_tilde: vec![v0; n] }
    }
}

fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Phi(x)`, accurate in both tails.
pub fn log_cdf(x: f64) -> f64 {
    if x > 5.0 {
        (-0.5 * erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else if x > -30.0 {
        cdf(x).ln()
    } else {
        // asymptotic series of the Mills ratio
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2);
        ln_pdf(x) - (-x).ln() + series.ln()
    }
}

/// Both ratios for `b < a <= 0`.
fn lower_tail_ratios(a: f64, b: f64) -> (f64, f64) {
    let la = log_cdf(a);
    let lb = log_cdf(b);
    let lz = la + (-(lb - la).exp_m1()).ln();
    let w = (ln_pdf(a) - lz).exp();
    // phi(b) / phi(a)
    let d = 0.5 * (a - b) * (a + b);
    let r1 = -w * d.exp_m1();
    let r2 = w * (a - b * d.exp());
    (r1, r2)
}

/// Returns `((phi(eta) - phi(xi)) / Z, (eta phi(eta) - xi phi(xi)) / Z)`
/// with `Z = Phi(eta) - Phi(xi)`, for `xi < eta`.
pub fn truncation_ratios(eta: f64, xi: f64) -> (f64, f64) {
    debug_assert!(xi < eta, "empty interval: xi = {xi}, eta = {eta}");
    if eta <= 0.0 {
        lower_tail_ratios(eta, xi)
    } else if xi >= 0.0 {
        let (r1, r2) = lower_tail_ratios(-xi, -eta);
        (-r1, r2)
    } else {
        let z = 1.0 - cdf(xi) - cdf(-eta);
        let pe = ln_pdf(eta).exp();
        let px = ln_pdf(xi).exp();
        ((pe - px) / z, (eta * pe - xi * px) / z)
    }
}

/// Posterior mean and variance of one real component.
///
/// `level` identifies the bin; the bin is folded onto the positive axis by
/// `sign(level)` so that `eta` uses the bin edge nearer zero and `xi` the
/// farther one.
pub fn posterior_component(level: f64, u: f64, v_tilde: f64, sigma2: f64, spec: &QuantizerSpec) -> (f64, f64) {
    let (mean, term) = posterior_terms(level, u, v_tilde, sigma2, spec);
    let total = sigma2 + v_tilde;
    (mean, 0.5 * v_tilde - v_tilde * v_tilde / (2.0 * total) * term)
}

/// Posterior mean and the bracketed variance term of one real component.
fn posterior_terms(level: f64, u: f64, v_tilde: f64, sigma2: f64, spec: &QuantizerSpec) -> (f64, f64) {
    let (lo, hi) = spec.bin_bounds(spec.bin_index(level));
    let sign = if level >= 0.0 { 1.0 } else { -1.0 };
    let near = lo.abs().min(hi.abs());
    let far = lo.abs().max(hi.abs());
    let total = sigma2 + v_tilde;
    let s = (0.5 * total).sqrt();
    let folded = sign * u;
    let eta = (folded - near) / s;
    let xi = (folded - far) / s;
    let (r1, r2) = truncation_ratios(eta, xi);
    let mean = u + sign * v_tilde / (2.0 * total).sqrt() * r1;
    (mean, r2 + r1 * r1)
}

/// MMSE de-quantization of one antenna column.
///
/// Returns the posterior means and the per-antenna posterior variance
/// (real and imaginary parts summed, each averaged over the M pilots).
pub fn mmse_dequantize(
    ytilde: ArrayView1<'_, C64>,
    u_tilde: ArrayView1<'_, C64>,
    v_tilde: f64,
    sigma2: f64,
    spec: &QuantizerSpec,
) -> (Vec<C64>, f64) {
    let m = ytilde.len();
    let total = sigma2 + v_tilde;
    let mut zhat = Vec::with_capacity(m);
    let mut acc_re = 0.0;
    let mut acc_im = 0.0;
    for (y, u) in ytilde.iter().zip(u_tilde.iter()) {
        let (mr, tr) = posterior_terms(y.re, u.re, v_tilde, sigma2, spec);
        let (mi, ti) = posterior_terms(y.im, u.im, v_tilde, sigma2, spec);
        zhat.push(C64::new(mr, mi));
        acc_re += tr;
        acc_im += ti;
    }
    let shrink = v_tilde * v_tilde / (2.0 * total);
    let nu_re = 0.5 * v_tilde - shrink * acc_re / m as f64;
    let nu_im = 0.5 * v_tilde - shrink * acc_im / m as f64;
    (zhat, (nu_re + nu_im).max(VARIANCE_FLOOR))
}

/// Extrinsic message of one low-resolution column:
/// `1/nu_ext = 1/nu - 1/v`, `z_ext = nu_ext (zhat/nu - u/v)`.
///
/// The boolean is set when the precision came out non-positive (or above the
/// ceiling) and `nu_ext` was clamped.
pub fn extrinsic_column(zhat: &[C64], nu: f64, u_tilde: ArrayView1<'_, C64>, v_tilde: f64) -> (Vec<C64>, f64, bool) {
    let precision = 1.0 / nu - 1.0 / v_tilde;
    let (nu_ext, clamped) =
        if precision <= 1.0 / NU_EXT_CEILING { (NU_EXT_CEILING, true) } else { ((1.0 / precision).max(VARIANCE_FLOOR), false) };
    let z = zhat.iter().zip(u_tilde.iter()).map(|(&zh, &u)| (zh / nu - u / v_tilde) * nu_ext).collect();
    (z, nu_ext, clamped)
}

/// Outcome of one pass of the non-linear module over every antenna.
#[derive(Debug, Clone)]
pub struct DequantPass {
    pub belief: DequantBelief,
    /// Number of antennas whose extrinsic variance was clamped.
    pub clamps: usize,
}

/// Runs the non-linear module on every antenna. High-resolution antennas
/// pass `Y~` through with variance `sigma2`.
pub fn dequantize(frame: &QuantizedFrame, prior: &PriorBelief, sigma2: f64) -> DequantPass {
    let (m, n_r) = frame.ytilde.dim();
    let hi = frame.hi_mask();
    let spec = frame.spec;
    let cols = par::map_indexed(n_r, |n| {
        let y = frame.ytilde.column(n);
        if hi[n] {
            (y.to_vec(), sigma2, false)
        } else {
            let u = prior.u_tilde.column(n);
            let (zhat, nu) = mmse_dequantize(y, u, prior.v_tilde[n], sigma2, &spec);
            extrinsic_column(&zhat, nu, u, prior.v_tilde[n])
        }
    });
    let mut z_ext = Array2::zeros((m, n_r));
    let mut nu_ext = Vec::with_capacity(n_r);
    let mut clamps = 0;
    for (mut dst, (z, nu, clamped)) in z_ext.axis_iter_mut(Axis(1)).zip(cols) {
        dst.iter_mut().zip(z).for_each(|(d, v)| *d = v);
        nu_ext.push(nu);
        clamps += clamped as usize;
    }
    DequantPass { belief: DequantBelief { z_ext, nu_ext }, clamps }
}
