//! Partial-DFT pilot matrix.
//!
//! `S` keeps `M` rows of the unitary K-point DFT, so `S S^H = I_M`. Products
//! with `S` and `S^H` are evaluated column by column with a length-K FFT;
//! [`PilotMatrix::dense`] materializes the matrix for small problems and tests.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{config_err, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Clone)]
pub struct PilotMatrix {
    m: usize,
    k: usize,
    rows: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PilotMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PilotMatrix").field("m", &self.m).field("k", &self.k).field("rows", &self.rows).finish()
    }
}

/// Draws `M` distinct DFT rows uniformly at random.
pub fn make_pilot<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Result<PilotMatrix> {
    if m > k {
        return Err(config_err(format!("pilot length {m} exceeds device count {k}")));
    }
    let mut rows = index::sample(rng, k, m).into_vec();
    rows.sort_unstable();
    PilotMatrix::from_rows(k, rows)
}

impl PilotMatrix {
    pub fn from_rows(k: usize, rows: Vec<usize>) -> Result<Self> {
        let m = rows.len();
        if m == 0 || m > k {
            return Err(config_err(format!("invalid pilot: {m} rows of a {k}-point DFT")));
        }
        let mut seen = vec![false; k];
        for &r in &rows {
            if r >= k || seen[r] {
                return Err(config_err(format!("pilot row {r} out of range or repeated")));
            }
            seen[r] = true;
        }
        let mut planner = FftPlanner::new();
        Ok(Self { m, k, rows, forward: planner.plan_fft_forward(k), inverse: planner.plan_fft_inverse(k) })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.rows
    }

    /// Entry `S[i][j] = exp(-2 pi i row_i j / K) / sqrt(K)`.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        let phase = -2.0 * std::f64::consts::PI * ((self.rows[i] * j) % self.k) as f64 / self.k as f64;
        C64::from_polar(1.0 / (self.k as f64).sqrt(), phase)
    }

    pub fn dense(&self) -> CMatrix {
        Array2::from_shape_fn((self.m, self.k), |(i, j)| self.entry(i, j))
    }

    /// Column `j` of `S`.
    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.m).map(|i| self.entry(i, j)).collect()
    }

    /// `S x` for every column of `x` (shape (K, N)); returns (M, N).
    pub fn apply(&self, x: ArrayView2<'_, C64>) -> CMatrix {
        assert_eq!(x.nrows(), self.k, "operand has {} rows, expected K = {}", x.nrows(), self.k);
        let scale = 1.0 / (self.k as f64).sqrt();
        let mut out = Array2::zeros((self.m, x.ncols()));
        let mut buf = vec![C64::new(0.0, 0.0); self.k];
        let mut scratch = vec![C64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for (col, mut dst) in x.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
            buf.iter_mut().zip(col.iter()).for_each(|(b, &v)| *b = v);
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for (d, &r) in dst.iter_mut().zip(&self.rows) {
                *d = buf[r] * scale;
            }
        }
        out
    }

    /// `S^H y` for every column of `y` (shape (M, N)); returns (K, N).
    pub fn apply_adjoint(&self, y: ArrayView2<'_, C64>) -> CMatrix {
        assert_eq!(y.nrows(), self.m, "operand has {} rows, expected M = {}", y.nrows(), self.m);
        let scale = 1.0 / (self.k as f64).sqrt();
        let mut out = Array2::zeros((self.k, y.ncols()));
        let mut buf = vec![C64::new(0.0, 0.0); self.k];
        let mut scratch = vec![C64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        for (col, mut dst) in y.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
            buf.fill(C64::new(0.0, 0.0));
            for (&v, &r) in col.iter().zip(&self.rows) {
                buf[r] = v;
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            dst.iter_mut().zip(&buf).for_each(|(d, &b)| *d = b * scale);
        }
        out
    }

    /// `|| S ||_F^2`, which equals M for unit-norm rows.
    pub fn frobenius_sq(&self) -> f64 {
        self.m as f64
    }

    /// `tr(I_K - (K/M) S^H S)`, zero for a de-correlated linear estimator.
    pub fn decorrelation_trace(&self) -> f64 {
        let dense = self.dense();
        let gram_trace: f64 = dense.iter().map(|z| z.norm_sqr()).sum();
        self.k as f64 - (self.k as f64 / self.m as f64) * gram_trace
    }
}
