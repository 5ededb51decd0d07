//! Mixed-ADC receive front end: AGC followed by per-antenna quantization.
//!
//! High-resolution antennas pass the (gain-scaled) signal through; the rest
//! quantize real and imaginary parts independently with a uniform B-bit
//! quantizer whose thresholds are `r_b = -1 + 2^(1-B) b`.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, C64};
use crate::pilot::PilotMatrix;

/// Target RMS of the real part after AGC; +-3 sigma spans the quantizer core.
pub const AGC_TARGET_RMS: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub bits: u32,
    /// Magnitude replacing the infinite outer thresholds in estimator arithmetic.
    pub clamp: f64,
}

impl QuantizerSpec {
    pub fn new(bits: u32, clamp: f64) -> Self {
        assert!(bits >= 1 && clamp > 1.0);
        Self { bits, clamp }
    }

    pub fn levels_count(&self) -> usize {
        1usize << self.bits
    }

    fn step(&self) -> f64 {
        2f64.powi(1 - self.bits as i32)
    }

    /// Finite thresholds `r_1 .. r_{2^B - 1}`.
    pub fn thresholds(&self) -> Vec<f64> {
        (1..self.levels_count()).map(|b| -1.0 + self.step() * b as f64).collect()
    }

    /// Output level of bin `b` (1-based): `-1 + 2^-B (2b - 1)`.
    pub fn level(&self, b: usize) -> f64 {
        -1.0 + 2f64.powi(-(self.bits as i32)) * (2 * b - 1) as f64
    }

    pub fn levels(&self) -> Vec<f64> {
        (1..=self.levels_count()).map(|b| self.level(b)).collect()
    }

    /// Bin (1-based) containing `x`, bins being right-closed `(r_{b-1}, r_b]`.
    pub fn bin_index(&self, x: f64) -> usize {
        let raw = ((x + 1.0) / self.step()).ceil();
        raw.clamp(1.0, self.levels_count() as f64) as usize
    }

    /// Bin bounds with the outer infinities replaced by `-+clamp`.
    pub fn bin_bounds(&self, b: usize) -> (f64, f64) {
        let n = self.levels_count();
        let lo = if b == 1 { -self.clamp } else { -1.0 + self.step() * (b - 1) as f64 };
        let hi = if b == n { self.clamp } else { -1.0 + self.step() * b as f64 };
        (lo, hi)
    }

    pub fn quantize_scalar(&self, x: f64) -> f64 {
        self.level(self.bin_index(x))
    }

    pub fn quantize_complex(&self, z: C64) -> C64 {
        C64::new(self.quantize_scalar(z.re), self.quantize_scalar(z.im))
    }
}

/// Mixed-resolution observation `Y~`, shape (M, N_r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedFrame {
    pub ytilde: CMatrix,
    pub agc_gain: f64,
    /// Set when the AGC saw an all-zero input and fell back to unit gain.
    pub agc_warning: bool,
    pub hi_set: Vec<usize>,
    pub lo_set: Vec<usize>,
    pub spec: QuantizerSpec,
}

impl QuantizedFrame {
    pub fn n_r(&self) -> usize {
        self.ytilde.ncols()
    }

    pub fn m(&self) -> usize {
        self.ytilde.nrows()
    }

    /// Per-antenna flag: true for high-resolution antennas.
    pub fn hi_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_r()];
        for &n in &self.hi_set {
            mask[n] = true;
        }
        mask
    }

    /// Antennas available for noise-level estimation: the high-resolution
    /// ones, or every antenna when there are none.
    pub fn reference_set(&self) -> Vec<usize> {
        if self.hi_set.is_empty() {
            (0..self.n_r()).collect()
        } else {
            self.hi_set.clone()
        }
    }

    /// `(1/|R|) sum_{n in R} ||Y~_n||^2 / ((snr + 1) M)` over the reference set.
    pub fn coarse_noise_level(&self, snr: f64) -> f64 {
        let set = self.reference_set();
        let m = self.m() as f64;
        let total: f64 = set.iter().map(|&n| self.ytilde.column(n).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();
        total / (set.len() as f64 * (snr + 1.0) * m)
    }
}

/// `Y = S H + W` with `W` i.i.d. `CN(0, sigma2)`.
pub fn received_signal<R: Rng + ?Sized>(pilot: &PilotMatrix, h: ArrayView2<'_, C64>, sigma2: f64, rng: &mut R) -> CMatrix {
    let mut y = pilot.apply(h);
    let sd = (sigma2 / 2.0).sqrt();
    for v in y.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += C64::new(re * sd, im * sd);
    }
    y
}

/// AGC gain `g = target_rms / rms(Re Y[:, hi_set])`. Falls back to all
/// antennas when `hi_set` is empty. Returns `(1, true)` for all-zero input.
pub fn agc_gain(y: ArrayView2<'_, C64>, hi_set: &[usize]) -> (f64, bool) {
    let cols: Vec<usize> = if hi_set.is_empty() { (0..y.ncols()).collect() } else { hi_set.to_vec() };
    let mut sum = 0.0;
    let mut count = 0usize;
    for &n in &cols {
        for z in y.column(n) {
            sum += z.re * z.re;
            count += 1;
        }
    }
    let rms = (sum / count.max(1) as f64).sqrt();
    if rms > 0.0 && rms.is_finite() {
        (AGC_TARGET_RMS / rms, false)
    } else {
        log::warn!("AGC input is all zero; using unit gain");
        (1.0, true)
    }
}

/// Quantizes the low-resolution columns of an already gain-scaled `y`.
pub fn quantize(y_scaled: ArrayView2<'_, C64>, spec: QuantizerSpec, hi_set: &[usize]) -> QuantizedFrame {
    let n_r = y_scaled.ncols();
    let mut hi_mask = vec![false; n_r];
    for &n in hi_set {
        hi_mask[n] = true;
    }
    let mut ytilde = Array2::zeros(y_scaled.dim());
    for (n, (src, mut dst)) in y_scaled.axis_iter(Axis(1)).zip(ytilde.axis_iter_mut(Axis(1))).enumerate() {
        if hi_mask[n] {
            dst.assign(&src);
        } else {
            dst.iter_mut().zip(src.iter()).for_each(|(d, &s)| *d = spec.quantize_complex(s));
        }
    }
    let lo_set = (0..n_r).filter(|&n| !hi_mask[n]).collect();
    let mut hi_sorted = hi_set.to_vec();
    hi_sorted.sort_unstable();
    QuantizedFrame { ytilde, agc_gain: 1.0, agc_warning: false, hi_set: hi_sorted, lo_set, spec }
}

/// AGC followed by mixed-resolution quantization.
pub fn observe(y: ArrayView2<'_, C64>, spec: QuantizerSpec, hi_set: &[usize]) -> QuantizedFrame {
    let (g, warn) = agc_gain(y, hi_set);
    let scaled = y.mapv(|z| z * g);
    let mut frame = quantize(scaled.view(), spec, hi_set);
    frame.agc_gain = g;
    frame.agc_warning = warn;
    frame
}
