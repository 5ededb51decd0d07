use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use jadce::harness::emit::emit;
use jadce::harness::{compute_metrics, generate, sweep, Algorithm, Axis, SweepOutcome, SweepSpec};
use jadce::par::{init_workers_from_env, Execution};
use jadce::{Profile, SystemConfig};

#[derive(Parser)]
#[command(name = "jadce", version, about = "Grant-free massive access detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file with SystemConfig fields; overrides the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    profile: Profile,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated algorithm ids.
    #[arg(long, value_delimiter = ',', default_value = "tsoamp")]
    algo: Vec<Algorithm>,
    /// Run trials on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn config(&self) -> Result<SystemConfig> {
        match &self.config {
            Some(path) => SystemConfig::load(path).with_context(|| format!("loading {}", path.display())),
            None => Ok(SystemConfig::profile(self.profile)),
        }
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Auto
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print its metrics.
    Trial {
        #[command(flatten)]
        common: Common,
        /// Directory receiving `<algo>-<hash>-<seed>.jdr` and `.json` result files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one axis and write the aggregated table.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: Axis,
        /// Comma-separated axis values; `all` means every antenna on the hi_count axis.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Output file; `.json` selects JSON, anything else CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the five canonical sweeps into a directory.
    Figures {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_values(axis: Axis, raw: &[String], cfg: &SystemConfig) -> Result<Vec<f64>> {
    raw.iter()
        .map(|v| {
            if axis == Axis::HiCount && v == "all" {
                Ok(cfg.n_r as f64)
            } else {
                v.trim().parse::<f64>().with_context(|| format!("bad axis value `{v}`"))
            }
        })
        .collect()
}

fn report(outcome: &SweepOutcome) -> bool {
    for (v, e) in &outcome.failed_points {
        log::error!("{} = {v} failed: {e}", outcome.axis);
    }
    for (v, seed, e) in &outcome.failed_trials {
        log::error!("{} = {v}, seed {seed} failed: {e}", outcome.axis);
    }
    outcome.is_clean()
}

fn run_sweep(cfg: &SystemConfig, spec: &SweepSpec, exec: Execution, out: &Path) -> Result<bool> {
    let start = Instant::now();
    let outcome = sweep(cfg, spec, exec);
    emit(&outcome.table, cfg, spec.base_seed, out)?;
    let json = out.with_extension("json");
    if json != out {
        emit(&outcome.table, cfg, spec.base_seed, &json)?;
    }
    log::info!("{} sweep: {} rows in {:.1} s -> {}", spec.axis, outcome.table.rows.len(), start.elapsed().as_secs_f64(), out.display());
    Ok(report(&outcome))
}

/// File stem, point config, axis, axis values and algorithms of one standard sweep.
type CanonicalSweep = (&'static str, SystemConfig, Axis, Vec<f64>, Vec<Algorithm>);

fn canonical_sweeps(cfg: &SystemConfig) -> Vec<CanonicalSweep> {
    use Algorithm::*;
    let at = |p_t: f64, m: usize| SystemConfig { p_t_dbm: p_t, m, ..cfg.clone() };
    vec![
        ("m", at(5.0, cfg.m), Axis::M, vec![20.0, 30.0, 40.0, 50.0, 60.0], vec![TsOamp, TsOampNsub1, OampMmv, Swomp]),
        ("p_t", at(cfg.p_t_dbm, 40), Axis::PT, vec![-5.0, 0.0, 5.0, 10.0, 15.0], vec![TsOamp, OampMmv, Swomp]),
        ("d", at(10.0, 50), Axis::D, vec![20.0, 50.0, 100.0, 200.0, 500.0, 1000.0], vec![TsOamp, TsOampNsub1]),
        ("hi_count", at(5.0, 40), Axis::HiCount, vec![0.0, 4.0, 8.0, 16.0, cfg.n_r as f64], vec![TsOamp]),
        ("n_r", at(5.0, 40), Axis::NR, vec![64.0, 128.0, 256.0], vec![TsOamp, TsOampNsub1]),
    ]
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    let workers = init_workers_from_env();
    log::debug!("{workers} worker threads");
    match cli.command {
        Command::Trial { common, out } => {
            let cfg = common.config()?;
            let input = generate(&cfg, common.seed)?;
            let hash = cfg.hash();
            for &alg in &common.algo {
                let start = Instant::now();
                let result = alg.run(&input, &cfg)?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                let metrics = compute_metrics(&result, &input.channel, alg.id(), &hash, common.seed, ms);
                println!("{}", serde_json::to_string(&metrics)?);
                if let Some(dir) = &out {
                    fs::create_dir_all(dir)?;
                    let stem = dir.join(format!("{}-{hash}-{}", alg.id(), common.seed));
                    let mut bin = std::io::BufWriter::new(fs::File::create(stem.with_extension("jdr"))?);
                    result.write_binary(&mut bin)?;
                    let summary = result.summary(&hash, common.seed);
                    fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&summary)?)?;
                }
            }
            Ok(true)
        }
        Command::Sweep { common, axis, values, trials, out } => {
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let cfg = common.config()?;
            let spec = SweepSpec {
                axis,
                values: parse_values(axis, &values, &cfg)?,
                trials,
                algorithms: common.algo.clone(),
                base_seed: common.seed,
            };
            run_sweep(&cfg, &spec, common.execution(), &out)
        }
        Command::Figures { common, trials, out } => {
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let cfg = common.config()?;
            fs::create_dir_all(&out)?;
            let mut clean = true;
            for (name, point_cfg, axis, values, algorithms) in canonical_sweeps(&cfg) {
                let spec = SweepSpec { axis, values, trials, algorithms, base_seed: common.seed };
                clean &= run_sweep(&point_cfg, &spec, common.execution(), &out.join(format!("{name}.csv")))?;
            }
            Ok(clean)
        }
    }
}
