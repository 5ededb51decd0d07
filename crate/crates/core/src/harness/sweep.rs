use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{config_err, Result};
use crate::harness::metrics::TrialMetrics;
use crate::harness::trial::{run_trial_multi, Algorithm};
use crate::par::Execution;
use crate::rng::trial_seed;

/// Margin around the nominal distance of a distance-sweep point, metres.
pub const DISTANCE_HALF_WIDTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Pilot length.
    M,
    /// Reference transmit power, dBm.
    PT,
    /// Number of high-resolution ADCs.
    HiCount,
    /// Device distance to the array centre, metres.
    D,
    /// Antenna count (dictionary size follows at twice the antennas).
    NR,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::M, Axis::PT, Axis::HiCount, Axis::D, Axis::NR];

    pub fn id(self) -> &'static str {
        match self {
            Axis::M => "m",
            Axis::PT => "p_t",
            Axis::HiCount => "hi_count",
            Axis::D => "d",
            Axis::NR => "n_r",
        }
    }

    /// `cfg` moved to `value` on this axis, validated.
    pub fn apply(self, cfg: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut c = cfg.clone();
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(config_err(format!("{} must be a non-negative integer, got {value}", self.id())))
            }
        };
        match self {
            Axis::M => c.m = count()?,
            Axis::PT => c.p_t_dbm = value,
            Axis::HiCount => {
                let n = count()?;
                c.delta_h = c
                    .delta_for_hi_count(n)
                    .ok_or_else(|| config_err(format!("{n} high-resolution ADCs cannot be spread evenly over {} antennas", c.n_r)))?;
            }
            Axis::D => {
                if value <= DISTANCE_HALF_WIDTH {
                    return Err(config_err(format!("distance {value} m too small")));
                }
                c.d_los_range = (value - DISTANCE_HALF_WIDTH, value + DISTANCE_HALF_WIDTH);
                c.d_nlos_range.1 = c.d_nlos_range.1.max(value + 200.0);
            }
            Axis::NR => {
                c.n_r = count()?;
                c.g_r = 2 * c.n_r;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Axis::ALL.into_iter().find(|a| a.id() == s).ok_or_else(|| format!("unknown axis `{s}` (expected m, p_t, hi_count, d or n_r)"))
    }
}

/// One aggregated `(point, algorithm, metric)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis: String,
    pub value: f64,
    pub algorithm: String,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn get(&self, value: f64, algorithm: &str, metric: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.value == value && r.algorithm == algorithm && r.metric == metric)
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.value) {
                v.push(r.value);
            }
        }
        v
    }
}

/// Per-trial metrics of one sweep point, ordered by trial index.
#[derive(Debug, Clone)]
pub struct PointTrials {
    pub value: f64,
    pub metrics: Vec<Vec<TrialMetrics>>,
}

impl PointTrials {
    /// Metrics of `algorithm` across trials.
    pub fn of(&self, algorithm: Algorithm) -> Vec<&TrialMetrics> {
        self.metrics.iter().flatten().filter(|m| m.algorithm == algorithm.id()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub axis: Axis,
    pub table: ResultTable,
    pub points: Vec<PointTrials>,
    /// Points that could not be evaluated, with the reason.
    pub failed_points: Vec<(f64, String)>,
    /// Trials that failed to generate, by point value and seed.
    pub failed_trials: Vec<(f64, u64, String)>,
}

impl SweepOutcome {
    pub fn point(&self, value: f64) -> Option<&PointTrials> {
        self.points.iter().find(|p| p.value == value)
    }

    pub fn is_clean(&self) -> bool {
        self.failed_points.is_empty() && self.failed_trials.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub base_seed: u64,
}

/// `(mean, standard error)` of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Aggregates the trials of one point into AER and NMSE rows per algorithm.
///
/// NMSE averages the linear ratios and converts the mean to dB; its standard
/// error is carried through the conversion to first order.
pub fn aggregate(axis: Axis, value: f64, algorithms: &[Algorithm], metrics: &[Vec<TrialMetrics>]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for &alg in algorithms {
        let per: Vec<&TrialMetrics> = metrics.iter().flatten().filter(|m| m.algorithm == alg.id()).collect();
        if per.is_empty() {
            continue;
        }
        let aer: Vec<f64> = per.iter().map(|m| m.aer).collect();
        let (mean, stderr) = mean_stderr(&aer);
        rows.push(ResultRow {
            axis: axis.id().into(),
            value,
            algorithm: alg.id().into(),
            metric: "aer".into(),
            mean,
            stderr,
            trials: aer.len(),
        });
        let ratios: Vec<f64> = per.iter().filter_map(|m| m.nmse).collect();
        if !ratios.is_empty() {
            let (mean, stderr) = mean_stderr(&ratios);
            let db_stderr = if mean > 0.0 { 10.0 / std::f64::consts::LN_10 * stderr / mean } else { 0.0 };
            rows.push(ResultRow {
                axis: axis.id().into(),
                value,
                algorithm: alg.id().into(),
                metric: "nmse_db".into(),
                mean: crate::harness::metrics::to_db(mean),
                stderr: db_stderr,
                trials: ratios.len(),
            });
        }
    }
    rows
}

/// Runs `spec.trials` trials at every axis value. Trial `i` uses the same
/// seed at every point and for every algorithm.
pub fn sweep(cfg: &SystemConfig, spec: &SweepSpec, exec: Execution) -> SweepOutcome {
    let mut outcome = SweepOutcome {
        axis: spec.axis,
        table: ResultTable::default(),
        points: Vec::new(),
        failed_points: Vec::new(),
        failed_trials: Vec::new(),
    };
    for &value in &spec.values {
        let point_cfg = match spec.axis.apply(cfg, value) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("skipping {} = {value}: {e}", spec.axis);
                outcome.failed_points.push((value, e.to_string()));
                continue;
            }
        };
        let results = exec.map_indexed(spec.trials, |i| {
            let seed = trial_seed(spec.base_seed, i as u64);
            (seed, run_trial_multi(&point_cfg, &spec.algorithms, seed))
        });
        let mut metrics = Vec::with_capacity(results.len());
        for (seed, r) in results {
            match r {
                Ok(m) => metrics.push(m),
                Err(e) => {
                    log::warn!("{} = {value}, seed {seed}: trial skipped: {e}", spec.axis);
                    outcome.failed_trials.push((value, seed, e.to_string()));
                }
            }
        }
        outcome.table.rows.extend(aggregate(spec.axis, value, &spec.algorithms, &metrics));
        outcome.points.push(PointTrials { value, metrics });
    }
    outcome
}
