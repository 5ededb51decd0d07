//! Monte-Carlo driver: trial generation, metrics, sweeps and result files.

pub mod emit;
pub mod metrics;
pub mod sweep;
pub mod trial;

pub use metrics::{compute_metrics, TrialMetrics};
pub use sweep::{sweep, Axis, ResultRow, ResultTable, SweepOutcome, SweepSpec};
pub use trial::{generate, run_trial, run_trial_multi, Algorithm, TrialInput};
