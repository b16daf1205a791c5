//! End-to-end harness behavior at miniature scale: reproducibility, sweep
//! bookkeeping, resume equivalence, and CSV/summary plumbing.

use std::fs;

use somnet_core::config::{DatasetKind, ExperimentConfig, ModelKind};
use somnet_core::harness::{
    parse_results_csv, run_experiment, summarize, sweep, RunStatus, SweepGrid,
};

/// A deliberately tiny protocol so full runs finish in well under a second.
fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_text(
        "[run]\n\
         model = stdp\n\
         dataset = geometric\n\
         seed = 1\n\
         sleep_ratio = 0.1\n\
         [network]\n\
         n_exc = 40\n\
         n_inh = 10\n\
         [data]\n\
         n_train = 80\n\
         n_val = 20\n\
         n_test = 20\n\
         batch_size = 20\n\
         n_batches = 4\n\
         t_image = 20\n\
         [sg]\n\
         n_hidden = 30\n\
         minibatch = 10\n",
    )
    .unwrap();
    cfg.validate().unwrap();
    cfg
}

#[test]
fn identical_seeds_give_identical_records() {
    let cfg = tiny_config();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.val_curve, b.val_curve);
    assert_eq!(a.test_accuracy, b.test_accuracy);
    assert_eq!(a.batch, b.batch);
    assert_eq!(a.wake_threshold_count, b.wake_threshold_count);
    assert_eq!(a.wake_budget_count, b.wake_budget_count);
    assert_eq!(a.max_abs_weight, b.max_abs_weight);
    assert_eq!(a.spontaneous_spikes, b.spontaneous_spikes);

    let mut other_seed = cfg.clone();
    other_seed.seed = 2;
    let c = run_experiment(&other_seed).unwrap();
    assert_ne!(a.val_curve, c.val_curve, "different seeds should differ somewhere");
}

#[test]
fn sg_runs_are_reproducible_too() {
    let mut cfg = tiny_config();
    cfg.model = ModelKind::Sg;
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.val_curve, b.val_curve);
    assert_eq!(a.test_accuracy, b.test_accuracy);
    assert_eq!(a.status, RunStatus::Completed);
}

#[test]
fn early_stopping_never_exceeds_the_batch_budget() {
    let cfg = tiny_config();
    let record = run_experiment(&cfg).unwrap();
    assert!(record.batch <= cfg.split.n_batches);
    assert_eq!(record.val_curve.len(), record.batch);
    assert!(record.val_accuracy >= 0.0 && record.val_accuracy <= 1.0);
    assert!(record.test_accuracy >= 0.0 && record.test_accuracy <= 1.0);
}

#[test]
fn sweep_emits_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.csv");
    let grid = SweepGrid {
        models: vec![ModelKind::Stdp, ModelKind::Sg],
        datasets: vec![DatasetKind::Geometric],
        seeds: vec![1, 2],
        sleep_ratios: vec![0.0, 0.1, 1.0],
    };
    let outcome = sweep(&tiny_config(), &grid, 2, &out, false).unwrap();
    assert_eq!(outcome.completed, 12);
    assert!(outcome.failures.is_empty());

    let rows = parse_results_csv(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 12);
    let mut keys: Vec<String> = rows
        .iter()
        .map(|r| format!("{}|{}|{}|{}", r.model, r.dataset, r.seed, r.sleep_ratio))
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 12, "every grid point exactly once");

    // a 1x1x1x1 grid appends exactly one row
    let single = SweepGrid {
        models: vec![ModelKind::Stdp],
        datasets: vec![DatasetKind::Geometric],
        seeds: vec![9],
        sleep_ratios: vec![0.5],
    };
    let out2 = dir.path().join("single.csv");
    let outcome = sweep(&tiny_config(), &single, 1, &out2, false).unwrap();
    assert_eq!(outcome.completed, 1);
    assert_eq!(parse_results_csv(&fs::read_to_string(&out2).unwrap()).unwrap().len(), 1);
}

#[test]
fn interrupted_sweep_resumes_to_the_same_row_multiset() {
    let dir = tempfile::tempdir().unwrap();
    let full_path = dir.path().join("full.csv");
    let resumed_path = dir.path().join("resumed.csv");
    let grid = SweepGrid {
        models: vec![ModelKind::Stdp],
        datasets: vec![DatasetKind::Geometric],
        seeds: vec![1, 2],
        sleep_ratios: vec![0.0, 0.1],
    };
    let cfg = tiny_config();
    sweep(&cfg, &grid, 1, &full_path, false).unwrap();
    let full_text = fs::read_to_string(&full_path).unwrap();
    let full_rows = parse_results_csv(&full_text).unwrap();
    assert_eq!(full_rows.len(), 4);

    // simulate an interruption: keep the header and the first two rows
    let kept: Vec<&str> = full_text.lines().take(3).collect();
    fs::write(&resumed_path, format!("{}\n", kept.join("\n"))).unwrap();
    let outcome = sweep(&cfg, &grid, 1, &resumed_path, true).unwrap();
    assert_eq!(outcome.skipped, 2);
    assert_eq!(outcome.completed, 2);

    let norm = |rows: &[somnet_core::harness::CsvRow]| -> Vec<String> {
        let mut v: Vec<String> = rows
            .iter()
            .map(|r| {
                format!(
                    "{}|{}|{}|{}|{}|{}|{}",
                    r.model, r.dataset, r.seed, r.sleep_ratio, r.batch, r.val_accuracy, r.test_accuracy
                )
            })
            .collect();
        v.sort();
        v
    };
    let resumed_rows = parse_results_csv(&fs::read_to_string(&resumed_path).unwrap()).unwrap();
    assert_eq!(norm(&full_rows), norm(&resumed_rows));
}

#[test]
fn summarize_handles_sweep_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.csv");
    let grid = SweepGrid {
        models: vec![ModelKind::Stdp],
        datasets: vec![DatasetKind::Geometric],
        seeds: vec![1, 2],
        sleep_ratios: vec![0.0],
    };
    sweep(&tiny_config(), &grid, 1, &out, false).unwrap();
    let rows = summarize(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].runs, 2);
    assert!(rows[0].ci_lo <= rows[0].mean_accuracy && rows[0].mean_accuracy <= rows[0].ci_hi);
}

#[test]
fn telemetry_files_are_written_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config();
    cfg.telemetry_dir = Some(dir.path().to_path_buf());
    run_experiment(&cfg).unwrap();
    let path = dir.path().join("stdp-geometric-s1-r0.1.jsonl");
    let text = fs::read_to_string(path).unwrap();
    let mut saw_batch = false;
    let mut saw_sleep = false;
    let mut saw_summary = false;
    for line in text.lines() {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        match value["event"].as_str().unwrap() {
            "batch" => saw_batch = true,
            "sleep_phase" => saw_sleep = true,
            "run_summary" => saw_summary = true,
            other => panic!("unexpected event {other}"),
        }
    }
    assert!(saw_batch && saw_sleep && saw_summary);
}

#[test]
fn missing_dataset_root_is_a_data_error() {
    let mut cfg = tiny_config();
    cfg.dataset = DatasetKind::Kmnist;
    cfg.dataset_root = Some(std::path::PathBuf::from("/nonexistent/datasets"));
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err, somnet_core::Error::Data(_)), "{err}");
}
