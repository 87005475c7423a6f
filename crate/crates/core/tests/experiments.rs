use std::fs;

use rmader::harness::{aggregate, emit_report, read_runs, run_experiment, DeltaDcSpec, ExperimentSpec, ScenarioGen};
use rmader::netsim::{run, Jitter, Scenario, SimParams};
use rmader::protocol::Mode;

fn small_spec(modes: Vec<Mode>, introd: Vec<f64>, dc: Vec<DeltaDcSpec>, runs: u32) -> ExperimentSpec {
    ExperimentSpec {
        scenario: ScenarioGen::Circle {
            n_agents: 4,
            radius: 4.0,
            altitude: 1.0,
        },
        base: SimParams::default(),
        modes,
        delta_introd: introd,
        jitter: Jitter::Uniform { a: 0.0, b: 0.03 },
        delta_dc: dc,
        runs_per_cell: runs,
        base_seed: 11,
        calibration_samples: 2000,
    }
}

#[test]
fn report_files_and_recomputable_aggregates() {
    let spec = small_spec(
        vec![Mode::Mader, Mode::Rmader],
        vec![0.0, 0.05],
        vec![
            DeltaDcSpec::Offset { offset: 0.035 },
            DeltaDcSpec::Percentile { p: 75.0 },
        ],
        2,
    );
    let report = run_experiment(&spec, 1).unwrap();
    assert_eq!(report.cells.len(), 2 + 4);
    assert_eq!(report.runs.len(), 6 * 2);
    assert!(!report.any_errors());
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    for f in ["runs.csv", "cells.csv", "delays.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let rows = read_runs(&dir.path().join("runs.csv")).unwrap();
    assert_eq!(rows, report.runs);
    for cell in &report.cells {
        assert_eq!(aggregate(cell, &rows), report.summaries[cell.id]);
    }
    let p75 = &report.cells.iter().find(|c| c.delta_dc_label == "p75").unwrap();
    assert!((p75.delta_dc - 0.0225).abs() < 0.002, "{}", p75.delta_dc);
    let hist = fs::read_to_string(dir.path().join("delays.csv")).unwrap();
    assert!(hist.lines().count() > 1);
}

#[test]
fn manifest_reproduces_runs() {
    let spec = small_spec(
        vec![Mode::Rmader],
        vec![0.05],
        vec![DeltaDcSpec::Offset { offset: 0.035 }],
        2,
    );
    let dir = tempfile::tempdir().unwrap();
    emit_report(&run_experiment(&spec, 1).unwrap(), dir.path()).unwrap();
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let again = ExperimentSpec::from_json(&manifest).unwrap();
    assert_eq!(again, spec);
    let dir2 = tempfile::tempdir().unwrap();
    emit_report(&run_experiment(&again, 1).unwrap(), dir2.path()).unwrap();
    assert_eq!(
        fs::read(dir.path().join("runs.csv")).unwrap(),
        fs::read(dir2.path().join("runs.csv")).unwrap()
    );
}

#[test]
fn empty_experiment_writes_headers_only() {
    let spec = small_spec(vec![], vec![], vec![], 1);
    let report = run_experiment(&spec, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    for f in ["runs.csv", "cells.csv", "delays.csv"] {
        let text = fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(text.lines().count(), 1, "{f}");
    }
}

#[test]
fn parallel_matches_sequential() {
    let spec = small_spec(
        vec![Mode::Mader, Mode::Rmader],
        vec![0.1],
        vec![DeltaDcSpec::Offset { offset: 0.035 }],
        3,
    );
    let a = run_experiment(&spec, 1).unwrap();
    let b = run_experiment(&spec, 3).unwrap();
    assert_eq!(a.runs, b.runs);
    assert_eq!(a.summaries, b.summaries);
}

#[test]
fn same_seed_same_log() {
    let spec = small_spec(
        vec![Mode::Rmader],
        vec![0.05],
        vec![DeltaDcSpec::Offset { offset: 0.035 }],
        1,
    );
    let cells = rmader::harness::cells(&spec).unwrap();
    let mut sc: Scenario = rmader::harness::cell_scenario(&spec, &cells[0], 5).unwrap();
    sc.params.record_log = true;
    let a = run(&sc).unwrap();
    let b = run(&sc).unwrap();
    assert!(!a.log.is_empty());
    assert_eq!(
        rmader::netsim::log_to_jsonl(&a.log),
        rmader::netsim::log_to_jsonl(&b.log)
    );
    sc.params.seed = 6;
    let c = run(&sc).unwrap();
    assert_ne!(
        rmader::netsim::log_to_jsonl(&a.log),
        rmader::netsim::log_to_jsonl(&c.log)
    );
}

#[test]
fn realized_delays_respect_the_model() {
    let mut spec = small_spec(
        vec![Mode::Rmader],
        vec![0.04],
        vec![DeltaDcSpec::Offset { offset: 0.035 }],
        1,
    );
    spec.scenario = ScenarioGen::Circle {
        n_agents: 10,
        radius: 10.0,
        altitude: 1.0,
    };
    let report = run_experiment(&spec, 1).unwrap();
    let d = &report.delays[0];
    assert!(d.len() >= 100, "{}", d.len());
    assert!(d.min().unwrap() >= 0.04);
    assert!(d.max().unwrap() <= 0.07 + 1e-12);
}

#[test]
fn collision_rate_does_not_grow_with_delta_dc() {
    let spec = small_spec(
        vec![Mode::Rmader],
        vec![0.1],
        vec![
            DeltaDcSpec::Absolute { value: 0.0 },
            DeltaDcSpec::Percentile { p: 50.0 },
            DeltaDcSpec::AboveMax { margin: 0.005 },
        ],
        20,
    );
    let report = run_experiment(&spec, 1).unwrap();
    let pct: Vec<f64> = report.summaries.iter().map(|c| c.collision_pct).collect();
    eprintln!("collision % by delta_dc: {pct:?}");
    assert!(pct.windows(2).all(|w| w[1] <= w[0]), "{pct:?}");
    assert_eq!(*pct.last().unwrap(), 0.0);
}
