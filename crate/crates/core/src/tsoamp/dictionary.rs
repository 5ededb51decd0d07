//! Block-diagonal subarray steering dictionary.
//!
//! Each of the `N_sub` blocks is the `(N_r/N_sub) x G` matrix
//! `D[m][n] = (-1)^m exp(j 2 pi m n / G) / sqrt(G)` (0-based, `G = G_r/N_sub`),
//! i.e. a DFT steering dictionary whose angular grid is shifted to
//! `[-pi, pi)`. Products with `D_sub` and `D_sub^H` go through length-G FFTs
//! on each row segment.

use std::fmt;
use std::sync::Arc;

use ndarray::{s, Array2, ArrayView2, Axis};
use rustfft::{Fft, FftPlanner};

use crate::error::{config_err, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Clone)]
pub struct SubarrayDictionary {
    n_r: usize,
    g_r: usize,
    n_sub: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SubarrayDictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubarrayDictionary").field("n_r", &self.n_r).field("g_r", &self.g_r).field("n_sub", &self.n_sub).finish()
    }
}

impl SubarrayDictionary {
    pub fn new(n_r: usize, g_r: usize, n_sub: usize) -> Result<Self> {
        if n_sub == 0 || !n_r.is_multiple_of(n_sub) || !g_r.is_multiple_of(n_sub) {
            return Err(config_err(format!("N_r = {n_r} and G_r = {g_r} must both be divisible by N_sub = {n_sub}")));
        }
        if g_r < n_r {
            return Err(config_err(format!("dictionary size G_r = {g_r} below N_r = {n_r}")));
        }
        let g = g_r / n_sub;
        let mut planner = FftPlanner::new();
        Ok(Self { n_r, g_r, n_sub, forward: planner.plan_fft_forward(g), inverse: planner.plan_fft_inverse(g) })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn g_r(&self) -> usize {
        self.g_r
    }

    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    /// Antennas per subarray.
    pub fn block_rows(&self) -> usize {
        self.n_r / self.n_sub
    }

    /// Angular bins per subarray.
    pub fn block_cols(&self) -> usize {
        self.g_r / self.n_sub
    }

    /// Entry `(m, n)` of a single block, 0-based.
    pub fn block_entry(&self, m: usize, n: usize) -> C64 {
        let g = self.block_cols();
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        let phase = 2.0 * std::f64::consts::PI * ((m * n) % g) as f64 / g as f64;
        C64::from_polar(sign / (g as f64).sqrt(), phase)
    }

    /// The full `N_r x G_r` block-diagonal matrix.
    pub fn dense(&self) -> CMatrix {
        let (br, bc) = (self.block_rows(), self.block_cols());
        let mut d = Array2::zeros((self.n_r, self.g_r));
        for b in 0..self.n_sub {
            for m in 0..br {
                for n in 0..bc {
                    d[[b * br + m, b * bc + n]] = self.block_entry(m, n);
                }
            }
        }
        d
    }

    /// Subarray index owning angular column `n`.
    pub fn block_of_column(&self, n: usize) -> usize {
        n / self.block_cols()
    }

    /// `A D_sub` for `A` with `N_r` columns; returns `G_r` columns.
    pub fn analyze(&self, a: ArrayView2<'_, C64>) -> CMatrix {
        assert_eq!(a.ncols(), self.n_r);
        let (br, bc) = (self.block_rows(), self.block_cols());
        let scale = 1.0 / (bc as f64).sqrt();
        let mut out = Array2::zeros((a.nrows(), self.g_r));
        let mut buf = vec![C64::new(0.0, 0.0); bc];
        let mut scratch = vec![C64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        for (row, mut dst) in a.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            for b in 0..self.n_sub {
                buf.fill(C64::new(0.0, 0.0));
                for m in 0..br {
                    let v = row[b * br + m];
                    buf[m] = if m % 2 == 0 { v } else { -v };
                }
                self.inverse.process_with_scratch(&mut buf, &mut scratch);
                dst.slice_mut(s![b * bc..(b + 1) * bc]).iter_mut().zip(&buf).for_each(|(d, &v)| *d = v * scale);
            }
        }
        out
    }

    /// `X D_sub^H` for `X` with `G_r` columns; returns `N_r` columns.
    pub fn synthesize(&self, x: ArrayView2<'_, C64>) -> CMatrix {
        assert_eq!(x.ncols(), self.g_r);
        let (br, bc) = (self.block_rows(), self.block_cols());
        let scale = 1.0 / (bc as f64).sqrt();
        let mut out = Array2::zeros((x.nrows(), self.n_r));
        let mut buf = vec![C64::new(0.0, 0.0); bc];
        let mut scratch = vec![C64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for (row, mut dst) in x.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            for b in 0..self.n_sub {
                buf.iter_mut().zip(row.slice(s![b * bc..(b + 1) * bc])).for_each(|(d, &v)| *d = v);
                self.forward.process_with_scratch(&mut buf, &mut scratch);
                for m in 0..br {
                    let v = buf[m] * scale;
                    dst[b * br + m] = if m % 2 == 0 { v } else { -v };
                }
            }
        }
        out
    }

    /// `diag(D_sub^H diag(v) D_sub)`: per-antenna variances to per-bin variances.
    pub fn angular_variance(&self, v: &[f64]) -> Vec<f64> {
        let (br, bc) = (self.block_rows(), self.block_cols());
        let mut out = Vec::with_capacity(self.g_r);
        for b in 0..self.n_sub {
            let mean = v[b * br..(b + 1) * br].iter().sum::<f64>() / bc as f64;
            out.extend(std::iter::repeat_n(mean, bc));
        }
        out
    }

    /// `diag(D_sub diag(v) D_sub^H)`: per-bin variances back to per-antenna ones.
    pub fn spatial_variance(&self, v: &[f64]) -> Vec<f64> {
        let (br, bc) = (self.block_rows(), self.block_cols());
        let mut out = Vec::with_capacity(self.n_r);
        for b in 0..self.n_sub {
            let mean = v[b * bc..(b + 1) * bc].iter().sum::<f64>() / bc as f64;
            out.extend(std::iter::repeat_n(mean, br));
        }
        out
    }

    /// Fraction of the energy of `row` (length `N_r`) captured by its largest
    /// `fraction` of angular coefficients.
    pub fn top_energy_fraction(&self, row: &[C64], fraction: f64) -> f64 {
        let a = Array2::from_shape_vec((1, self.n_r), row.to_vec()).expect("row length");
        let x = self.analyze(a.view());
        let mut e: Vec<f64> = x.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = e.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        e.sort_unstable_by(|a, b| b.total_cmp(a));
        let keep = ((fraction * self.g_r as f64).ceil() as usize).clamp(1, self.g_r);
        e[..keep].iter().sum::<f64>() / total
    }
}
