//! Near-field spherical-wavefront channel and the row-sparse effective
//! channel matrix seen through the pilots.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use ndarray::Array2;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::scenario::{large_scale_gain, ActivityPattern, DevicePlacement};

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Effective channel, shape (K, N_r); row k is `alpha_k sqrt(P_k) beta h_k`.
    pub h: CMatrix,
    pub activity: ActivityPattern,
    pub placement: DevicePlacement,
    pub kappa: Vec<f64>,
    pub power: Vec<f64>,
}

impl ChannelRealization {
    /// Rows of `h` belonging to active devices, shape (K_a, N_r).
    pub fn active_rows(&self) -> CMatrix {
        let idx = self.activity.active_indices();
        self.h.select(ndarray::Axis(0), &idx)
    }

    /// Writes `<prefix>.bin` (row-major K x N_r, interleaved re/im, f64 LE)
    /// and `<prefix>.csv` (per-device metadata).
    pub fn export(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let prefix = prefix.as_ref();
        write_complex_bin(&prefix.with_extension("bin"), &self.h)?;
        let mut csv = std::io::BufWriter::new(std::fs::File::create(prefix.with_extension("csv"))?);
        writeln!(csv, "k,alpha,d_mid,kappa,power_w")?;
        for k in 0..self.h.nrows() {
            writeln!(csv, "{},{},{},{},{}", k, self.activity.alpha[k], self.placement.d_mid[k], self.kappa[k], self.power[k])?;
        }
        csv.flush()?;
        Ok(())
    }
}

pub(crate) fn write_complex_bin(path: &Path, m: &CMatrix) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for z in m.iter() {
        w.write_f64::<LittleEndian>(z.re)?;
        w.write_f64::<LittleEndian>(z.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Small-scale fading of every device at every antenna, shape (K, N_r).
pub fn small_scale(placement: &DevicePlacement, kappa: &[f64], cfg: &SystemConfig) -> Result<CMatrix> {
    let (k_dev, n_r) = placement.d_los.dim();
    if kappa.len() != k_dev {
        return Err(Error::Dimension(format!("{} Rician factors for {k_dev} devices", kappa.len())));
    }
    let l_p = placement.d_nlos.dim().2;
    let wave = 2.0 * PI / cfg.wavelength;
    let nlos_scale = if cfg.nlos_norm && l_p > 0 { 1.0 / (l_p as f64).sqrt() } else { 1.0 };

    let mut h = Array2::zeros((k_dev, n_r));
    for k in 0..k_dev {
        let los_amp = (kappa[k] / (kappa[k] + 1.0)).sqrt();
        let nlos_amp = (1.0 / (kappa[k] + 1.0)).sqrt() * nlos_scale;
        for n in 0..n_r {
            let mut v = C64::from_polar(los_amp, wave * placement.d_los[[k, n]]);
            let mut scatter = C64::new(0.0, 0.0);
            for l in 0..l_p {
                scatter += C64::from_polar(1.0, wave * placement.d_nlos[[k, n, l]]);
            }
            v += scatter * nlos_amp;
            h[[k, n]] = v;
        }
    }
    Ok(h)
}

/// Assembles the effective channel `H[k][n] = alpha_k sqrt(P_k) beta(k, n) h~[k][n]`.
pub fn assemble_h(
    activity: &ActivityPattern,
    placement: &DevicePlacement,
    kappa: &[f64],
    power: &[f64],
    cfg: &SystemConfig,
) -> Result<ChannelRealization> {
    let (k_dev, n_r) = placement.d_los.dim();
    if activity.alpha.len() != k_dev || power.len() != k_dev || k_dev != cfg.k || n_r != cfg.n_r {
        return Err(Error::Config(format!(
            "channel inputs disagree: activity {}, power {}, placement {k_dev}x{n_r}, config {}x{}",
            activity.alpha.len(),
            power.len(),
            cfg.k,
            cfg.n_r
        )));
    }
    let tilde = small_scale(placement, kappa, cfg)?;
    let mut h = Array2::zeros((k_dev, n_r));
    for k in activity.active_indices() {
        let amp = power[k].sqrt();
        for n in 0..n_r {
            h[[k, n]] = tilde[[k, n]] * (amp * large_scale_gain(placement.d_los[[k, n]], cfg));
        }
    }
    Ok(ChannelRealization { h, activity: activity.clone(), placement: placement.clone(), kappa: kappa.to_vec(), power: power.to_vec() })
}
