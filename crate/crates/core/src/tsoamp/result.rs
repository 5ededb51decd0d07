//! Detector output and its persistence.
//!
//! The binary layout is little-endian: magic `JDR1`, then `K`, `N_r` and the
//! angular width `G` (0 when there is no angular estimate) as `u64`, the
//! activity bytes, `K` support probabilities, `X` (if `G > 0`) and `H` as
//! interleaved real/imaginary `f64` in row-major order.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, CMatrix, C64};
use crate::oamp_core::ClampCounts;

const MAGIC: &[u8; 4] = b"JDR1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    One,
    Two,
    /// Single-stage baselines.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub stage: Stage,
    pub t: usize,
    pub sigma2: f64,
    pub tau_mean: f64,
    pub gamma_mean: f64,
    pub delta_mu: f64,
    pub clamps: ClampCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub stage1_iterations: usize,
    pub stage2_iterations: usize,
    pub clamps: ClampCounts,
    pub sigma2_trajectory: Vec<f64>,
    pub agc_warning: bool,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub alpha_hat: Vec<u8>,
    /// Angular-domain estimate, (K, G_r). Absent for purely spatial detectors.
    pub x_hat: Option<CMatrix>,
    /// Spatial channel estimate in the units of the true channel, (K, N_r).
    pub h_hat: CMatrix,
    pub lambda_final: Vec<f64>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultSummary {
    pub config_hash: String,
    pub seed: u64,
    pub detected: Vec<usize>,
    pub lambda_final: Vec<f64>,
    pub h_hat_energy: f64,
    pub finite: bool,
    pub diagnostics: Diagnostics,
}

fn write_matrix<W: Write>(w: &mut W, m: &CMatrix) -> Result<()> {
    for z in m.iter() {
        w.write_f64::<LittleEndian>(z.re)?;
        w.write_f64::<LittleEndian>(z.im)?;
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<CMatrix> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re = r.read_f64::<LittleEndian>()?;
        let im = r.read_f64::<LittleEndian>()?;
        data.push(C64::new(re, im));
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}

impl DetectionResult {
    pub fn k(&self) -> usize {
        self.alpha_hat.len()
    }

    pub fn is_finite(&self) -> bool {
        all_finite(self.h_hat.view())
            && self.x_hat.as_ref().is_none_or(|x| all_finite(x.view()))
            && self.lambda_final.iter().all(|l| l.is_finite())
            && self.diagnostics.sigma2_trajectory.iter().all(|s| s.is_finite())
    }

    pub fn summary(&self, config_hash: &str, seed: u64) -> ResultSummary {
        ResultSummary {
            config_hash: config_hash.to_string(),
            seed,
            detected: self.alpha_hat.iter().enumerate().filter(|(_, &a)| a == 1).map(|(k, _)| k).collect(),
            lambda_final: self.lambda_final.clone(),
            h_hat_energy: self.h_hat.iter().map(|z| z.norm_sqr()).sum(),
            finite: self.is_finite(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Writes the arrays; diagnostics live in the JSON summary only.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        let (k, n_r) = self.h_hat.dim();
        let g = self.x_hat.as_ref().map_or(0, |x| x.ncols());
        w.write_all(MAGIC)?;
        for v in [k, n_r, g] {
            w.write_u64::<LittleEndian>(v as u64)?;
        }
        w.write_all(&self.alpha_hat)?;
        for &l in &self.lambda_final {
            w.write_f64::<LittleEndian>(l)?;
        }
        if let Some(x) = &self.x_hat {
            write_matrix(w, x)?;
        }
        write_matrix(w, &self.h_hat)
    }

    /// Inverse of [`write_binary`](Self::write_binary); diagnostics come back empty.
    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a detection result file".into()));
        }
        let k = r.read_u64::<LittleEndian>()? as usize;
        let n_r = r.read_u64::<LittleEndian>()? as usize;
        let g = r.read_u64::<LittleEndian>()? as usize;
        let mut alpha_hat = vec![0u8; k];
        r.read_exact(&mut alpha_hat)?;
        let lambda_final = (0..k).map(|_| r.read_f64::<LittleEndian>()).collect::<std::io::Result<Vec<_>>>()?;
        let x_hat = if g > 0 { Some(read_matrix(r, k, g)?) } else { None };
        let h_hat = read_matrix(r, k, n_r)?;
        Ok(Self { alpha_hat, x_hat, h_hat, lambda_final, diagnostics: Diagnostics::default() })
    }
}
