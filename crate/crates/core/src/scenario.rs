//! Device placement, activity, large-scale fading and power control.
//!
//! Geometry is two-dimensional: the array lies on the x axis with
//! half-wavelength spacing and devices occupy the half-plane y > 0. Device
//! positions are drawn in polar coordinates around the reference antenna
//! (the `N_r/2`-th element, 1-based), so the mid-array LoS distance used by
//! power control and the Rician factor is exactly the drawn radius.

use ndarray::{Array2, Array3};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{PathlossMode, SystemConfig};
use crate::error::{Error, Result};

/// Upper bound on scatterer redraws per NLoS path.
pub const MAX_SCATTERER_RETRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePlacement {
    /// Device positions (x, y) in metres.
    pub positions: Vec<(f64, f64)>,
    /// Scatterer positions, `scatterers[k][l]`.
    pub scatterers: Vec<Vec<(f64, f64)>>,
    /// LoS distance from device `k` to antenna `n`, shape (K, N_r).
    pub d_los: Array2<f64>,
    /// Total device -> scatterer -> antenna length, shape (K, N_r, L_p).
    pub d_nlos: Array3<f64>,
    /// LoS distance to the reference antenna.
    pub d_mid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityPattern {
    pub alpha: Vec<u8>,
}

impl ActivityPattern {
    pub fn active_indices(&self) -> Vec<usize> {
        self.alpha.iter().enumerate().filter(|(_, &a)| a == 1).map(|(k, _)| k).collect()
    }

    pub fn count(&self) -> usize {
        self.alpha.iter().filter(|&&a| a == 1).count()
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.alpha[k] == 1
    }
}

/// x coordinate of antenna `n` (0-based).
pub fn antenna_x(n: usize, n_r: usize, wavelength: f64) -> f64 {
    (n as f64 - (n_r as f64 - 1.0) / 2.0) * wavelength / 2.0
}

/// 0-based index of the reference (mid-array) antenna.
pub fn reference_antenna(n_r: usize) -> usize {
    (n_r / 2).max(1) - 1
}

pub fn aperture(n_r: usize, wavelength: f64) -> f64 {
    (n_r as f64 - 1.0) * wavelength / 2.0
}

pub fn rayleigh_distance(n_r: usize, wavelength: f64) -> f64 {
    2.0 * aperture(n_r, wavelength).powi(2) / wavelength
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Exact Euclidean distances from `pos` to every antenna.
pub fn los_distances(pos: (f64, f64), n_r: usize, wavelength: f64) -> Vec<f64> {
    (0..n_r).map(|n| dist(pos, (antenna_x(n, n_r, wavelength), 0.0))).collect()
}

/// Places all K devices and their scatterers.
pub fn place_devices<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<DevicePlacement> {
    let n_r = cfg.n_r;
    let lam = cfg.wavelength;
    let ref_x = antenna_x(reference_antenna(n_r), n_r, lam);
    let max_angle = cfg.max_angle_deg.to_radians();
    let (d_lo, d_hi) = cfg.d_los_range;
    let (nl_lo, nl_hi) = cfg.d_nlos_range;
    let antennas: Vec<(f64, f64)> = (0..n_r).map(|n| (antenna_x(n, n_r, lam), 0.0)).collect();

    let mut positions = Vec::with_capacity(cfg.k);
    let mut scatterers = Vec::with_capacity(cfg.k);
    let mut d_los = Array2::zeros((cfg.k, n_r));
    let mut d_nlos = Array3::zeros((cfg.k, n_r, cfg.l_p));
    let mut d_mid = Vec::with_capacity(cfg.k);

    for k in 0..cfg.k {
        let theta = rng.random_range(-max_angle..max_angle);
        let r = rng.random_range(d_lo..d_hi);
        let pos = (ref_x + r * theta.sin(), r * theta.cos());
        for (n, &a) in antennas.iter().enumerate() {
            d_los[[k, n]] = dist(pos, a);
        }
        // the reference distance is the drawn radius up to rounding
        d_mid.push(d_los[[k, reference_antenna(n_r)]]);

        let mut dev_scat = Vec::with_capacity(cfg.l_p);
        for l in 0..cfg.l_p {
            let mut accepted = None;
            for _ in 0..MAX_SCATTERER_RETRIES {
                let phi = rng.random_range(-max_angle..max_angle);
                let rs = rng.random_range(nl_lo / 2.0..nl_hi / 2.0);
                let sc = (ref_x + rs * phi.sin(), rs * phi.cos());
                let leg = dist(pos, sc);
                let ok = antennas.iter().all(|&a| {
                    let total = leg + dist(sc, a);
                    total > nl_lo && total < nl_hi
                });
                if ok {
                    accepted = Some(sc);
                    break;
                }
            }
            let sc = accepted.ok_or_else(|| {
                Error::Scenario(format!(
                    "no scatterer for device {k} path {l} within {MAX_SCATTERER_RETRIES} draws \
                     (d_nlos_range = {:?}, d_mid = {:.1})",
                    cfg.d_nlos_range, r
                ))
            })?;
            let leg = dist(pos, sc);
            for (n, &a) in antennas.iter().enumerate() {
                d_nlos[[k, n, l]] = leg + dist(sc, a);
            }
            dev_scat.push(sc);
        }
        positions.push(pos);
        scatterers.push(dev_scat);
    }

    Ok(DevicePlacement { positions, scatterers, d_los, d_nlos, d_mid })
}

/// Rician factor (linear) from the mid-array distance: `(13 - 0.03 d)` dB.
pub fn rician_factor(d_mid: f64) -> f64 {
    10f64.powf((13.0 - 0.03 * d_mid) / 10.0)
}

/// Transmit power in watts under distance-compensating power control.
pub fn power_control(d_mid: f64, p_t_watts: f64) -> f64 {
    p_t_watts * (d_mid / 100.0).powi(2)
}

/// Amplitude multiplier applied to the small-scale channel at distance `d`.
pub fn large_scale_gain(d: f64, cfg: &SystemConfig) -> f64 {
    let friis = cfg.wavelength / (4.0 * std::f64::consts::PI * d);
    match cfg.pathloss_mode {
        PathlossMode::Literal => friis * friis,
        PathlossMode::FriisAmplitude => friis,
    }
}

/// Exactly `K_a` active devices drawn uniformly without replacement.
pub fn sample_activity<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ActivityPattern {
    let mut alpha = vec![0u8; cfg.k];
    for k in index::sample(rng, cfg.k, cfg.k_a) {
        alpha[k] = 1;
    }
    ActivityPattern { alpha }
}
