use std::time::Instant;

use jadce::harness::emit::{emit, read_csv, read_json, to_csv_string, CSV_HEADER};
use jadce::harness::metrics::to_db;
use jadce::harness::{generate, run_trial, run_trial_multi, sweep, Algorithm, Axis, ResultRow, ResultTable, SweepSpec};
use jadce::par::Execution;
use jadce::rng::trial_seed;
use jadce::SystemConfig;

fn small() -> SystemConfig {
    SystemConfig { n_r: 32, k: 40, k_a: 4, m: 20, g_r: 64, delta_h: 8, t1: 10, t2: 10, ..SystemConfig::desk() }
}

fn row(value: f64, metric: &str, mean: f64, stderr: f64) -> ResultRow {
    ResultRow { axis: "m".into(), value, algorithm: "tsoamp".into(), metric: metric.into(), mean, stderr, trials: 200 }
}

#[test]
fn two_point_table_matches_golden_csv() {
    let table = ResultTable {
        rows: vec![
            row(20.0, "aer", 0.0125, 0.0031),
            row(20.0, "nmse_db", -12.5, 0.25),
            row(30.0, "aer", 0.0, 0.0),
            row(30.0, "nmse_db", -14.75, 0.125),
        ],
    };
    let golden = include_str!("fixtures/two_point.csv");
    assert_eq!(to_csv_string(&table).unwrap(), golden);
    assert_eq!(read_csv(golden.as_bytes()).unwrap(), table);
}

#[test]
fn emitted_files_parse_back() {
    let cfg = small();
    let spec = SweepSpec { axis: Axis::M, values: vec![16.0, 20.0], trials: 3, algorithms: vec![Algorithm::TsOamp], base_seed: 3 };
    let table = sweep(&cfg, &spec, Execution::Sequential).table;
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let json = dir.path().join("t.json");
    emit(&table, &cfg, 3, &csv).unwrap();
    emit(&table, &cfg, 3, &json).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    assert_eq!(read_csv(text.as_bytes()).unwrap(), table);
    let doc = read_json(std::fs::File::open(&json).unwrap()).unwrap();
    assert_eq!(doc.rows, table.rows);
    assert_eq!(doc.config, cfg);
    assert_eq!(doc.config_hash, cfg.hash());
}

#[test]
fn same_seed_gives_same_metrics() {
    let cfg = small();
    let mut a = run_trial_multi(&cfg, &Algorithm::ALL, 17).unwrap();
    let mut b = run_trial_multi(&cfg, &Algorithm::ALL, 17).unwrap();
    for m in a.iter_mut().chain(b.iter_mut()) {
        m.runtime_ms = 0.0;
    }
    assert_eq!(a, b);
}

#[test]
fn trial_inputs_are_shared_and_reproducible() {
    let cfg = small();
    let (x, y) = (generate(&cfg, 5).unwrap(), generate(&cfg, 5).unwrap());
    assert_eq!(x.frame.ytilde, y.frame.ytilde);
    assert_eq!(x.pilot.row_indices(), y.pilot.row_indices());
    assert_eq!(x.channel.h, y.channel.h);
    let z = generate(&cfg, 6).unwrap();
    assert_ne!(x.frame.ytilde, z.frame.ytilde);
}

#[test]
fn desk_trial_finishes_within_a_minute() {
    let start = Instant::now();
    let m = run_trial(&SystemConfig::desk(), Algorithm::TsOamp, 1).unwrap();
    assert!(m.finite);
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn one_trial_table_is_that_trial() {
    let cfg = small();
    let spec = SweepSpec { axis: Axis::PT, values: vec![5.0], trials: 1, algorithms: vec![Algorithm::TsOamp], base_seed: 9 };
    let out = sweep(&cfg, &spec, Execution::Sequential);
    let m = run_trial(&cfg, Algorithm::TsOamp, trial_seed(9, 0)).unwrap();
    let aer = out.table.get(5.0, "tsoamp", "aer").unwrap();
    let db = out.table.get(5.0, "tsoamp", "nmse_db").unwrap();
    assert_eq!((aer.mean, aer.stderr, aer.trials), (m.aer, 0.0, 1));
    assert_eq!(db.mean, m.nmse_db.unwrap());
}

#[test]
fn nmse_is_averaged_before_conversion() {
    let cfg = small();
    let spec = SweepSpec { axis: Axis::M, values: vec![20.0], trials: 6, algorithms: vec![Algorithm::Swomp], base_seed: 2 };
    let out = sweep(&cfg, &spec, Execution::Sequential);
    let ratios: Vec<f64> = out.points[0].of(Algorithm::Swomp).iter().map(|m| m.nmse.unwrap()).collect();
    let want = to_db(ratios.iter().sum::<f64>() / ratios.len() as f64);
    let got = out.table.get(20.0, "swomp", "nmse_db").unwrap().mean;
    assert!((got - want).abs() < 1e-12);
    let mean_of_db = ratios.iter().map(|&r| to_db(r)).sum::<f64>() / ratios.len() as f64;
    assert!((got - mean_of_db).abs() > 1e-9, "test instance cannot tell the two apart");
}

#[test]
fn every_point_and_algorithm_sees_the_same_trial_seeds() {
    let cfg = small();
    let spec = SweepSpec {
        axis: Axis::M,
        values: vec![16.0, 24.0],
        trials: 4,
        algorithms: vec![Algorithm::TsOamp, Algorithm::Swomp],
        base_seed: 77,
    };
    let out = sweep(&cfg, &spec, Execution::Sequential);
    let want: Vec<u64> = (0..4).map(|i| trial_seed(77, i)).collect();
    for p in &out.points {
        for alg in [Algorithm::TsOamp, Algorithm::Swomp] {
            let seeds: Vec<u64> = p.of(alg).iter().map(|m| m.seed).collect();
            assert_eq!(seeds, want);
        }
    }
}

#[test]
fn identifiable_regime_has_zero_activity_errors() {
    let cfg = SystemConfig { m: 40, delta_h: 1, noise_rel: Some(1e-10), ..small() };
    let spec = SweepSpec { axis: Axis::M, values: vec![40.0], trials: 5, algorithms: vec![Algorithm::TsOamp], base_seed: 1 };
    let out = sweep(&cfg, &spec, Execution::Sequential);
    assert_eq!(out.table.get(40.0, "tsoamp", "aer").unwrap().mean, 0.0);
}

#[test]
fn parallel_and_sequential_sweeps_agree() {
    let cfg = small();
    let spec = SweepSpec {
        axis: Axis::PT,
        values: vec![0.0, 10.0],
        trials: 4,
        algorithms: vec![Algorithm::TsOamp, Algorithm::OampMmv],
        base_seed: 5,
    };
    let a = to_csv_string(&sweep(&cfg, &spec, Execution::Auto).table).unwrap();
    let b = to_csv_string(&sweep(&cfg, &spec, Execution::Sequential).table).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_points_are_reported_not_fatal() {
    let cfg = small();
    let spec = SweepSpec { axis: Axis::M, values: vec![20.0, 500.0], trials: 2, algorithms: vec![Algorithm::Swomp], base_seed: 1 };
    let out = sweep(&cfg, &spec, Execution::Sequential);
    assert_eq!(out.failed_points.len(), 1);
    assert!(!out.is_clean());
    assert!(out.table.get(20.0, "swomp", "aer").is_some());
}
