//! System configuration shared by every stage of the simulator.
//!
//! A [`SystemConfig`] fixes the array geometry, device population, front
//! end and the iteration budget of the detectors. Two named profiles are
//! provided: the full-size setup (`paper`) and a scaled-down `desk` setup
//! that keeps the ratios G_r/N_r, K_a/K and |H|/N_r of the full-size one.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, Result};

/// How the large-scale fading coefficient is applied to the small-scale channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PathlossMode {
    /// Multiply the channel by `(lambda / (4 pi d))^2` as written.
    Literal,
    /// Treat `(lambda / (4 pi d))^2` as a power gain, so the amplitude factor is `lambda / (4 pi d)`.
    #[default]
    FriisAmplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Desk,
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(format!("unknown profile `{other}` (expected desk|paper)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of receive antennas of the uniform linear array.
    pub n_r: usize,
    /// Number of potential devices.
    pub k: usize,
    /// Number of simultaneously active devices.
    pub k_a: usize,
    /// Pilot length.
    pub m: usize,
    /// Carrier wavelength in metres.
    pub wavelength: f64,
    /// NLoS paths per device.
    pub l_p: usize,
    /// Resolution of the low-resolution ADCs.
    pub bits: u32,
    /// Total angular dictionary size over all subarrays.
    pub g_r: usize,
    /// Number of subarrays.
    pub n_sub: usize,
    /// Spacing between high-resolution ADCs; `0` disables them entirely.
    pub delta_h: usize,
    /// Reference transmit power used by power control, dBm.
    pub p_t_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub t1: usize,
    pub t2: usize,
    /// Damping factor applied to `u` and `v_tilde`.
    pub epsilon: f64,
    /// Magnitude substituted for the infinite outer quantizer thresholds.
    pub clamp: f64,
    /// SNR threshold (linear) selecting the antennas used for the sparsity update.
    pub snr_th: f64,
    /// Range of the device distance to the array centre, metres.
    pub d_los_range: (f64, f64),
    /// Range of the total device-scatterer-antenna path length, metres.
    pub d_nlos_range: (f64, f64),
    pub pathloss_mode: PathlossMode,
    /// Half-width of the device angular sector, degrees off broadside.
    pub max_angle_deg: f64,
    /// Divide the NLoS sum by sqrt(L_p).
    pub nlos_norm: bool,
    /// Noise variance relative to the reference received power
    /// `P_t * beta(100 m)^2`; overrides the PSD/bandwidth noise when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_rel: Option<f64>,
    /// Whether K_a is available to initialise the prior sparsity ratio.
    pub ka_known: bool,
    /// Use the canonical spike-and-slab posterior variance instead of the `(1 - pi)|mu|^2` form.
    pub canonical_gamma: bool,
    /// Use the alternative slab-variance update (previous tau, unweighted square) instead of the EM form.
    pub verbatim_line19: bool,
    /// Average the posterior support over antennas when updating lambda in stage 1.
    pub common_support: bool,
    /// Relative change of mu below which an iteration loop stops early.
    pub early_stop_tol: f64,
}

impl SystemConfig {
    /// Full-size setup: N_r=512, K=500, K_a=50, G_r=1024, delta_H=32.
    pub fn paper() -> Self {
        Self {
            n_r: 512,
            k: 500,
            k_a: 50,
            m: 100,
            wavelength: 0.05,
            l_p: 5,
            bits: 2,
            g_r: 1024,
            n_sub: 2,
            delta_h: 32,
            p_t_dbm: 5.0,
            bandwidth_hz: 1e6,
            noise_psd_dbm_per_hz: -174.0,
            t1: 30,
            t2: 20,
            epsilon: 0.4,
            clamp: 2.22,
            snr_th: 10.0,
            d_los_range: (10.0, 100.0),
            d_nlos_range: (10.0, 300.0),
            pathloss_mode: PathlossMode::FriisAmplitude,
            max_angle_deg: 80.0,
            nlos_norm: false,
            noise_rel: None,
            ka_known: true,
            canonical_gamma: false,
            verbatim_line19: false,
            common_support: true,
            early_stop_tol: 1e-6,
        }
    }

    /// Scaled-down setup: N_r=128, K=100, K_a=10, G_r=256, N_sub=2, delta_H=16.
    pub fn desk() -> Self {
        Self { n_r: 128, k: 100, k_a: 10, m: 40, g_r: 256, delta_h: 16, ..Self::paper() }
    }

    pub fn profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.n_r == 0 || self.k == 0 || self.m == 0 {
            return Err(config_err("n_r, k and m must be positive"));
        }
        if self.k_a > self.k {
            return Err(config_err(format!("k_a = {} exceeds k = {}", self.k_a, self.k)));
        }
        if self.m > self.k {
            return Err(config_err(format!("m = {} exceeds k = {}", self.m, self.k)));
        }
        if self.n_sub == 0 || !self.n_r.is_multiple_of(self.n_sub) || !self.g_r.is_multiple_of(self.n_sub) {
            return Err(config_err("n_sub must divide both n_r and g_r"));
        }
        if self.g_r < self.n_r {
            return Err(config_err("g_r must be at least n_r"));
        }
        if self.delta_h != 0 && !self.n_r.is_multiple_of(self.delta_h) {
            return Err(config_err("delta_h must divide n_r"));
        }
        if self.bits == 0 || self.bits > 16 {
            return Err(config_err("bits must lie in 1..=16"));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(config_err("epsilon must lie in [0, 1)"));
        }
        if self.clamp <= 1.0 {
            return Err(config_err("clamp must exceed 1"));
        }
        if !(self.wavelength > 0.0) {
            return Err(config_err("wavelength must be positive"));
        }
        let (lo, hi) = self.d_los_range;
        if !(lo > 0.0 && hi > lo) {
            return Err(config_err("d_los_range must satisfy 0 < lo < hi"));
        }
        let (lo, hi) = self.d_nlos_range;
        if !(lo > 0.0 && hi > lo) {
            return Err(config_err("d_nlos_range must satisfy 0 < lo < hi"));
        }
        if !(self.max_angle_deg > 0.0 && self.max_angle_deg < 90.0) {
            return Err(config_err("max_angle_deg must lie in (0, 90)"));
        }
        if let Some(rel) = self.noise_rel {
            if !(rel > 0.0) {
                return Err(config_err("noise_rel must be positive"));
            }
        }
        Ok(())
    }

    /// Indices (0-based) of the antennas fed by high-resolution ADCs.
    ///
    /// With spacing `delta_h` the 1-based set is `{delta_h/2, 3 delta_h/2, ...}`.
    pub fn hi_set(&self) -> Vec<usize> {
        if self.delta_h == 0 {
            return Vec::new();
        }
        let first = (self.delta_h / 2).max(1) - 1;
        (first..self.n_r).step_by(self.delta_h).collect()
    }

    /// Spacing that yields `count` high-resolution antennas, if one exists.
    pub fn delta_for_hi_count(&self, count: usize) -> Option<usize> {
        if count == 0 {
            Some(0)
        } else if count <= self.n_r && self.n_r.is_multiple_of(count) {
            Some(self.n_r / count)
        } else {
            None
        }
    }

    pub fn p_t_watts(&self) -> f64 {
        dbm_to_watts(self.p_t_dbm)
    }

    /// Thermal noise variance in watts (PSD times bandwidth).
    pub fn thermal_noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_per_hz) * self.bandwidth_hz
    }

    /// Noise variance actually applied to the observation.
    pub fn noise_variance(&self) -> f64 {
        match self.noise_rel {
            Some(rel) => rel * self.reference_rx_power(),
            None => self.thermal_noise_watts(),
        }
    }

    /// Received power of a power-controlled device at the 100 m reference distance.
    pub fn reference_rx_power(&self) -> f64 {
        let beta = crate::scenario::large_scale_gain(100.0, self);
        self.p_t_watts() * beta * beta
    }

    /// Prior support probability used to initialise lambda.
    pub fn lambda0(&self) -> f64 {
        let l = if self.ka_known { self.k_a as f64 / self.k as f64 } else { 0.2 * self.m as f64 / self.k as f64 };
        l.clamp(1e-6, 1.0 - 1e-6)
    }

    /// Short content hash identifying this configuration in result files.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::desk()
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_defaults() {
        let c = SystemConfig::paper();
        assert_eq!((c.n_r, c.k, c.k_a, c.l_p, c.bits), (512, 500, 50, 5, 2));
        assert_eq!(c.g_r, 2 * c.n_r);
        assert_eq!((c.n_sub, c.delta_h, c.t1, c.t2), (2, 32, 30, 20));
        assert_eq!(c.epsilon, 0.4);
        assert_eq!(c.clamp, 2.22);
        assert_eq!(c.snr_th, 10.0);
        c.validate().unwrap();
        SystemConfig::desk().validate().unwrap();
    }

    #[test]
    fn hi_set_layout() {
        let c = SystemConfig::paper();
        let h = c.hi_set();
        // 1-based {16, 48, 80, ...}
        assert_eq!(&h[..3], &[15, 47, 79]);
        assert_eq!(h.len(), 16);
        let all = SystemConfig { delta_h: 1, ..SystemConfig::desk() };
        assert_eq!(all.hi_set(), (0..128).collect::<Vec<_>>());
        let none = SystemConfig { delta_h: 0, ..SystemConfig::desk() };
        assert!(none.hi_set().is_empty());
    }

    #[test]
    fn noise_is_minus_114_dbm() {
        let c = SystemConfig::paper();
        let dbm = 10.0 * (c.thermal_noise_watts() * 1e3).log10();
        assert!((dbm + 114.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = SystemConfig::desk();
        for bad in [
            SystemConfig { k_a: 101, ..base.clone() },
            SystemConfig { m: 101, ..base.clone() },
            SystemConfig { n_sub: 3, ..base.clone() },
            SystemConfig { delta_h: 3, ..base.clone() },
            SystemConfig { bits: 0, ..base.clone() },
            SystemConfig { epsilon: 1.0, ..base.clone() },
            SystemConfig { clamp: 1.0, ..base.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let c = SystemConfig { noise_rel: Some(1e-10), ..SystemConfig::desk() };
        let text = c.to_toml_string().unwrap();
        let back = SystemConfig::from_toml_str(&text).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        assert_ne!(c.hash(), SystemConfig::desk().hash());
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn partial_toml_falls_back_to_desk() {
        let c = SystemConfig::from_toml_str("m = 20\nk_a = 5\n").unwrap();
        assert_eq!(c, SystemConfig { m: 20, k_a: 5, ..SystemConfig::desk() });
        assert!(SystemConfig::from_toml_str("bogus = 1\n").is_err());
    }
}
