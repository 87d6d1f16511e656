//! File-level behavior of the pipeline stages: output inventories,
//! sample counts, reproducibility, and failure modes.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use tankguard::dataset::{Dataset, Label};
use tankguard::pipeline::{
    cmd_collect, cmd_evaluate, cmd_pipeline, cmd_simulate, cmd_train, PipelineConfig,
    PipelineError,
};

fn config_in(dir: &Path) -> PipelineConfig {
    PipelineConfig {
        out_dir: dir.to_path_buf(),
        ..PipelineConfig::default()
    }
}

/// Reduced sample counts keep the stage tests quick; the full protocol
/// runs in the acceptance suite.
fn small_config_in(dir: &Path) -> PipelineConfig {
    PipelineConfig {
        train_per_class: 120,
        test_normal: 120,
        test_per_intensity: 30,
        ..config_in(dir)
    }
}

#[test]
fn simulate_zero_steps_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = cmd_simulate(&config_in(dir.path()), 0).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text, "step,time,level,inflow,outflow,pump,valve\n");
}

#[test]
fn simulate_trajectory_stays_in_band_after_warmup() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_in(dir.path());
    let path = cmd_simulate(&config, 10_000).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let delta = config.plant.pump_max_flow * config.plant.dt / config.plant.tank_section;

    let mut seen_drain = false;
    let mut warmed_up = false;
    let mut checked = 0;
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let level: f64 = fields[2].parse().unwrap();
        let pump = fields[5] == "1";
        if !warmed_up {
            if !pump {
                seen_drain = true;
            } else if seen_drain {
                warmed_up = true;
            }
            continue;
        }
        assert!(level >= config.thresholds.l - delta - 1e-9, "level {level} under band");
        assert!(level <= config.thresholds.h + delta + 1e-9, "level {level} over band");
        assert!(level > config.thresholds.ll && level < config.thresholds.hh);
        checked += 1;
    }
    assert!(checked > 9_000, "warm-up consumed too much of the run");

    // identical configuration writes identical bytes
    let second = tempfile::tempdir().unwrap();
    let other = cmd_simulate(&config_in(second.path()), 10_000).unwrap();
    assert_eq!(text, std::fs::read_to_string(other).unwrap());
}

#[test]
fn collect_writes_the_protocol_inventory() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config_in(dir.path());
    let files = cmd_collect(&config).unwrap();

    let names: BTreeSet<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let expected: BTreeSet<String> = [
        "normal_train.csv",
        "normal_test.csv",
        "fdi_1_train.csv",
        "fdi_1_test.csv",
        "fdi_5_test.csv",
        "fdi_10_train.csv",
        "fdi_10_test.csv",
        "fdi_15_test.csv",
        "fdi_20_train.csv",
        "fdi_20_test.csv",
    ]
    .into_iter()
    .map(str::to_string)
    .collect();
    assert_eq!(names, expected);

    let count = |name: &str| Dataset::load(&dir.path().join(name)).unwrap().len();
    assert_eq!(count("normal_train.csv"), config.train_per_class);
    assert_eq!(count("normal_test.csv"), config.test_normal);
    for tag in ["1", "10", "20"] {
        assert_eq!(count(&format!("fdi_{tag}_train.csv")), config.train_per_class);
    }
    for tag in ["1", "5", "10", "15", "20"] {
        assert_eq!(count(&format!("fdi_{tag}_test.csv")), config.test_per_intensity);
    }

    // train and test halves of one scenario share no provenance
    let train = Dataset::load(&dir.path().join("fdi_10_train.csv")).unwrap();
    let test = Dataset::load(&dir.path().join("fdi_10_test.csv")).unwrap();
    let train_ids: BTreeSet<String> = train.provenance().iter().map(|p| p.to_string()).collect();
    assert!(test.provenance().iter().all(|p| !train_ids.contains(&p.to_string())));

    // attacked samples are anomalous, normal samples are not
    assert!(train.records().iter().all(|r| r.label == Label::Anomalous));
    let normal = Dataset::load(&dir.path().join("normal_train.csv")).unwrap();
    assert!(normal.records().iter().all(|r| r.label == Label::Normal));
}

#[test]
fn train_writes_models_and_grids_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config_in(dir.path());
    cmd_collect(&config).unwrap();
    let files = cmd_train(&config).unwrap();

    let names: BTreeSet<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let expected: BTreeSet<String> = [
        "grid_1pct.csv",
        "model_1pct.txt",
        "grid_10pct.csv",
        "model_10pct.txt",
        "grid_20pct.csv",
        "model_20pct.txt",
    ]
    .into_iter()
    .map(str::to_string)
    .collect();
    assert_eq!(names, expected);

    for tag in ["1", "10", "20"] {
        let grid = std::fs::read_to_string(dir.path().join(format!("grid_{tag}pct.csv"))).unwrap();
        assert_eq!(grid.lines().count(), 1 + config.grid().len());
    }

    // refitting from the same datasets and seed reproduces the models
    let model = |tag: &str| std::fs::read(dir.path().join(format!("model_{tag}pct.txt"))).unwrap();
    let before: Vec<Vec<u8>> = ["1", "10", "20"].iter().map(|t| model(t)).collect();
    cmd_train(&config).unwrap();
    let after: Vec<Vec<u8>> = ["1", "10", "20"].iter().map(|t| model(t)).collect();
    assert_eq!(before, after);
}

#[test]
fn evaluate_writes_reports_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config_in(dir.path());
    cmd_collect(&config).unwrap();
    cmd_train(&config).unwrap();
    let files = cmd_evaluate(&config).unwrap();

    let names: BTreeSet<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for required in [
        "test_set.csv",
        "report_1pct.txt",
        "report_1pct.csv",
        "report_10pct.txt",
        "report_10pct.csv",
        "report_20pct.txt",
        "report_20pct.csv",
        "comparison.csv",
        "comparison.txt",
    ] {
        assert!(names.contains(required), "missing {required}");
    }

    let test_set = Dataset::load(&dir.path().join("test_set.csv")).unwrap();
    assert_eq!(test_set.len(), config.test_normal + 5 * config.test_per_intensity);
    let (normal, anomalous) = test_set.class_counts();
    assert_eq!(normal, config.test_normal);
    assert_eq!(anomalous, 5 * config.test_per_intensity);

    let comparison = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(comparison.lines().next(), Some("model,accuracy,precision,recall,f1"));
    assert_eq!(comparison.lines().count(), 4);
    let table = std::fs::read_to_string(dir.path().join("comparison.txt")).unwrap();
    for column in ["Model", "Accuracy", "Precision", "Recall", "F1-Score", "best by F1"] {
        assert!(table.contains(column), "comparison table lacks `{column}`");
    }

    // evaluating again from the same inputs writes identical outputs
    let before = std::fs::read(dir.path().join("comparison.csv")).unwrap();
    cmd_evaluate(&config).unwrap();
    assert_eq!(before, std::fs::read(dir.path().join("comparison.csv")).unwrap());
}

#[test]
fn pipeline_equals_stage_composition_and_writes_manifest() {
    let staged = tempfile::tempdir().unwrap();
    let config = small_config_in(staged.path());
    cmd_collect(&config).unwrap();
    cmd_train(&config).unwrap();
    cmd_evaluate(&config).unwrap();

    let piped = tempfile::tempdir().unwrap();
    let pipeline_config = small_config_in(piped.path());
    let summary = cmd_pipeline(&pipeline_config).unwrap();

    for name in &summary.files {
        let a = std::fs::read(staged.path().join(name)).unwrap();
        let b = std::fs::read(piped.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between staged and pipeline runs");
    }

    let manifest = std::fs::read_to_string(&summary.manifest).unwrap();
    for key in [
        "format.version=1",
        "pipeline.seed=42",
        "plant.pump_max_flow=0.05",
        "thresholds.l=0.66",
        "attack.sign=random_per_frame",
        "pipeline.train_intensities=0.01,0.1,0.2",
        "timing.collect_ms=",
        "file.comparison.csv=",
    ] {
        assert!(manifest.contains(key), "manifest lacks `{key}`");
    }
}

#[test]
fn different_seeds_same_inventory_different_metrics() {
    let a_dir = tempfile::tempdir().unwrap();
    let b_dir = tempfile::tempdir().unwrap();
    let a = cmd_pipeline(&small_config_in(a_dir.path())).unwrap();
    let b = cmd_pipeline(&PipelineConfig {
        seed: 43,
        ..small_config_in(b_dir.path())
    })
    .unwrap();
    assert_eq!(a.files, b.files);
    let metrics_a = std::fs::read(a_dir.path().join("comparison.csv")).unwrap();
    let metrics_b = std::fs::read(b_dir.path().join("comparison.csv")).unwrap();
    assert_ne!(metrics_a, metrics_b);
}

#[test]
fn stage_errors_name_the_stage_and_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config_in(dir.path());
    let err = cmd_train(&config).unwrap_err();
    let message = err.to_string();
    assert!(message.starts_with("train stage"), "got `{message}`");
    assert!(message.contains("normal_train.csv"), "got `{message}`");
    assert_eq!(err.exit_code(), 2);

    let err = cmd_evaluate(&config).unwrap_err();
    assert!(err.to_string().starts_with("evaluate stage"));
}

#[test]
fn overridden_counts_flow_through() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        train_per_class: 40,
        test_normal: 30,
        test_per_intensity: 10,
        ..config_in(dir.path())
    };
    cmd_collect(&config).unwrap();
    assert_eq!(Dataset::load(&dir.path().join("normal_train.csv")).unwrap().len(), 40);
    assert_eq!(Dataset::load(&dir.path().join("normal_test.csv")).unwrap().len(), 30);
    assert_eq!(Dataset::load(&dir.path().join("fdi_15_test.csv")).unwrap().len(), 10);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_tankguard");

    // usage error: unknown flag
    let out = Command::new(bin).arg("--bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // config error: unreadable config file
    let out = Command::new(bin)
        .args(["simulate", "--steps", "1", "--config", "/nonexistent.conf"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // success
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(bin)
        .args(["simulate", "--steps", "5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn config_file_reaches_every_module() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.conf");
    std::fs::write(
        &config_path,
        "# experiment overrides\n\
         plant.dt = 0.2\n\
         thresholds.hh = 1.5\n\
         registers.level_scale = 2000\n\
         attack.sign = always_positive\n\
         pipeline.seed = 7\n\
         grid.k = 3\n",
    )
    .unwrap();
    let config = PipelineConfig::load(Some(&config_path)).unwrap();
    assert_eq!(config.plant.dt, 0.2);
    assert_eq!(config.thresholds.hh, 1.5);
    assert_eq!(config.registers.fixed_point_scale, 2000);
    assert_eq!(config.seed, 7);
    assert_eq!(config.folds, 3);

    let err = PipelineConfig::load(Some(Path::new("/nonexistent.conf"))).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)));
}
