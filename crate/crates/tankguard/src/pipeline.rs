//! End-to-end experiment orchestration.
//!
//! The pipeline runs the data-collection scenarios, builds the balanced
//! training sets, grid-searches and fits one model per training
//! intensity, and evaluates every model on the common mixed-intensity
//! test set. Each stage is also callable on its own and works purely
//! through files in the output directory, so a stage can be re-run or
//! inspected in isolation. All randomness derives from the master seed
//! and stable stage labels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{format_list, Config, ConfigError};
use crate::dataset::{
    build_test_set, build_training_set, collect, Dataset, Intensity, ScenarioConfig,
};
use crate::eval::{compare, evaluate, EvalReport};
use crate::forest::{fit_forest, grid_search, Forest, ForestError, Hyperparams};
use crate::plant::{self, PlantParams, PlantState, Thresholds};
use crate::protocol::RegisterMap;
use crate::seeds;
use crate::wire::{AttackConfig, SignPolicy};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{stage} stage: {detail}")]
    Stage { stage: &'static str, detail: String },
    #[error("{stage} stage hit an internal invariant violation: {detail}")]
    Internal { stage: &'static str, detail: String },
}

impl PipelineError {
    /// 2 for configuration/data problems, 3 for internal invariant
    /// violations (process exit 1 is reserved for usage errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Internal { .. } => 3,
            _ => 2,
        }
    }
}

fn stage_err(stage: &'static str, detail: impl ToString) -> PipelineError {
    PipelineError::Stage {
        stage,
        detail: detail.to_string(),
    }
}

fn forest_err(stage: &'static str, err: ForestError) -> PipelineError {
    match err {
        ForestError::SingleClass | ForestError::EmptyTraining | ForestError::UndefinedImpurity => {
            PipelineError::Internal {
                stage,
                detail: err.to_string(),
            }
        }
        other => stage_err(stage, other),
    }
}

/// Everything one experiment needs: process parameters, protocol
/// layout, attack plan, sample counts, hyperparameter grid, and seed.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub plant: PlantParams,
    pub thresholds: Thresholds,
    pub registers: RegisterMap,
    /// Sign policy applied by every attack scenario.
    pub attack_sign: SignPolicy,
    /// Registers the attacker modifies.
    pub attack_targets: Vec<u16>,
    /// Intensities that get their own training set (and model).
    pub train_intensities: Vec<Intensity>,
    /// Intensities represented in the test set; superset of training.
    pub test_intensities: Vec<Intensity>,
    pub train_per_class: usize,
    pub test_normal: usize,
    pub test_per_intensity: usize,
    pub grid_n_trees: Vec<usize>,
    pub grid_max_depth: Vec<Option<usize>>,
    pub grid_min_samples_split: Vec<usize>,
    pub grid_features_per_split: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let registers = RegisterMap::default();
        let fractions = |list: &[f64]| {
            list.iter()
                .map(|f| Intensity::from_fraction(*f).expect("default intensities are valid"))
                .collect()
        };
        Self {
            plant: PlantParams::default(),
            thresholds: Thresholds::default(),
            attack_sign: SignPolicy::RandomPerFrame,
            attack_targets: vec![registers.level_register],
            registers,
            train_intensities: fractions(&[0.01, 0.10, 0.20]),
            test_intensities: fractions(&[0.01, 0.05, 0.10, 0.15, 0.20]),
            train_per_class: 500,
            test_normal: 500,
            test_per_intensity: 100,
            grid_n_trees: vec![10, 50, 100],
            grid_max_depth: vec![Some(8), None],
            grid_min_samples_split: vec![2],
            grid_features_per_split: vec![2],
            folds: 5,
            seed: 42,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "plant.pump_max_flow",
    "plant.tank_section",
    "plant.outlet_section",
    "plant.gravity",
    "plant.dt",
    "thresholds.ll",
    "thresholds.l",
    "thresholds.h",
    "thresholds.hh",
    "registers.level",
    "registers.inflow",
    "registers.outflow",
    "registers.pump",
    "registers.valve",
    "registers.level_scale",
    "registers.flow_scale",
    "attack.sign",
    "attack.targets",
    "pipeline.train_intensities",
    "pipeline.test_intensities",
    "pipeline.train_per_class",
    "pipeline.test_normal",
    "pipeline.test_per_intensity",
    "pipeline.seed",
    "pipeline.out_dir",
    "grid.n_trees",
    "grid.max_depth",
    "grid.min_samples_split",
    "grid.features_per_split",
    "grid.k",
];

impl PipelineConfig {
    pub fn from_config(config: &Config) -> Result<Self, PipelineError> {
        config.ensure_known(KNOWN_KEYS)?;
        let mut cfg = Self::default();
        cfg.plant = PlantParams::from_config(config)?;
        cfg.thresholds = Thresholds::from_config(config)?;
        cfg.registers = RegisterMap::from_config(config)?;
        cfg.attack_targets = vec![cfg.registers.level_register];

        if let Some(raw) = config.get("attack.sign") {
            cfg.attack_sign = SignPolicy::parse(raw).ok_or_else(|| {
                PipelineError::Invalid(format!("attack.sign: unknown policy `{raw}`"))
            })?;
        }
        config.override_u16_list("attack.targets", &mut cfg.attack_targets)?;

        let mut train = fractions_of(&cfg.train_intensities);
        let mut test = fractions_of(&cfg.test_intensities);
        config.override_f64_list("pipeline.train_intensities", &mut train)?;
        config.override_f64_list("pipeline.test_intensities", &mut test)?;
        cfg.train_intensities = to_intensities("pipeline.train_intensities", &train)?;
        cfg.test_intensities = to_intensities("pipeline.test_intensities", &test)?;

        config.override_usize("pipeline.train_per_class", &mut cfg.train_per_class)?;
        config.override_usize("pipeline.test_normal", &mut cfg.test_normal)?;
        config.override_usize("pipeline.test_per_intensity", &mut cfg.test_per_intensity)?;
        config.override_u64("pipeline.seed", &mut cfg.seed)?;
        if let Some(dir) = config.get("pipeline.out_dir") {
            cfg.out_dir = PathBuf::from(dir);
        }

        let mut n_trees: Vec<u64> = cfg.grid_n_trees.iter().map(|&v| v as u64).collect();
        let mut raw = format_list(&n_trees);
        config.override_string("grid.n_trees", &mut raw);
        n_trees = crate::config::parse_list(&raw).ok_or_else(|| {
            PipelineError::Invalid(format!("grid.n_trees: bad list `{raw}`"))
        })?;
        cfg.grid_n_trees = n_trees.into_iter().map(|v| v as usize).collect();

        if let Some(raw) = config.get("grid.max_depth") {
            cfg.grid_max_depth = raw
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    if item == "none" {
                        Ok(None)
                    } else {
                        item.parse::<usize>().map(Some).map_err(|_| {
                            PipelineError::Invalid(format!("grid.max_depth: bad entry `{item}`"))
                        })
                    }
                })
                .collect::<Result<_, _>>()?;
        }

        let mut min_split: Vec<u64> = cfg.grid_min_samples_split.iter().map(|&v| v as u64).collect();
        let mut raw = format_list(&min_split);
        config.override_string("grid.min_samples_split", &mut raw);
        min_split = crate::config::parse_list(&raw).ok_or_else(|| {
            PipelineError::Invalid(format!("grid.min_samples_split: bad list `{raw}`"))
        })?;
        cfg.grid_min_samples_split = min_split.into_iter().map(|v| v as usize).collect();

        let mut m: Vec<u64> = cfg.grid_features_per_split.iter().map(|&v| v as u64).collect();
        let mut raw = format_list(&m);
        config.override_string("grid.features_per_split", &mut raw);
        m = crate::config::parse_list(&raw).ok_or_else(|| {
            PipelineError::Invalid(format!("grid.features_per_split: bad list `{raw}`"))
        })?;
        cfg.grid_features_per_split = m.into_iter().map(|v| v as usize).collect();

        config.override_usize("grid.k", &mut cfg.folds)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, PipelineError> {
        let config = match path {
            Some(p) => Config::from_file(p)?,
            None => Config::empty(),
        };
        Self::from_config(&config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.plant
            .validate_against(&self.thresholds)
            .map_err(|e| PipelineError::Invalid(e.to_string()))?;
        self.registers
            .validate()
            .map_err(|e| PipelineError::Invalid(e.to_string()))?;
        if self.train_intensities.is_empty() || self.test_intensities.is_empty() {
            return Err(PipelineError::Invalid(
                "at least one training and one test intensity are required".into(),
            ));
        }
        for intensity in &self.train_intensities {
            if !self.test_intensities.contains(intensity) {
                return Err(PipelineError::Invalid(format!(
                    "training intensity {intensity} missing from the test intensities"
                )));
            }
        }
        if self.train_per_class == 0 || self.test_normal == 0 || self.test_per_intensity == 0 {
            return Err(PipelineError::Invalid("sample counts must be positive".into()));
        }
        if self.folds < 2 {
            return Err(PipelineError::Invalid("grid.k must be at least 2".into()));
        }
        if self.grid_n_trees.is_empty()
            || self.grid_max_depth.is_empty()
            || self.grid_min_samples_split.is_empty()
            || self.grid_features_per_split.is_empty()
        {
            return Err(PipelineError::Invalid("every grid axis needs a value".into()));
        }
        if self.attack_targets.is_empty() {
            return Err(PipelineError::Invalid("attack.targets must be non-empty".into()));
        }
        Ok(())
    }

    /// Cross product of the grid axes, in axis order.
    pub fn grid(&self) -> Vec<Hyperparams> {
        let mut cells = Vec::new();
        for &n_trees in &self.grid_n_trees {
            for &max_depth in &self.grid_max_depth {
                for &min_samples_split in &self.grid_min_samples_split {
                    for &features_per_split in &self.grid_features_per_split {
                        cells.push(Hyperparams {
                            n_trees,
                            max_depth,
                            min_samples_split,
                            features_per_split,
                        });
                    }
                }
            }
        }
        cells
    }

    fn attack(&self, intensity: Intensity) -> AttackConfig {
        AttackConfig {
            intensity: intensity.fraction(),
            sign_policy: self.attack_sign,
            targets: self.attack_targets.clone(),
            active_window: (0, u64::MAX),
        }
    }

    fn scenario_seed(&self, label: &str) -> u64 {
        seeds::derive_seed(self.seed, label)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn model_name(&self, intensity: Intensity) -> String {
        format!("model {}%", intensity.percent_label())
    }
}

fn fractions_of(intensities: &[Intensity]) -> Vec<f64> {
    intensities.iter().map(|i| i.fraction()).collect()
}

fn to_intensities(key: &str, fractions: &[f64]) -> Result<Vec<Intensity>, PipelineError> {
    let mut out: Vec<Intensity> = fractions
        .iter()
        .map(|f| {
            Intensity::from_fraction(*f)
                .ok_or_else(|| PipelineError::Invalid(format!("{key}: {f} outside [0, 1]")))
        })
        .collect::<Result<_, _>>()?;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn ensure_out_dir(config: &PipelineConfig, stage: &'static str) -> Result<(), PipelineError> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| stage_err(stage, format!("cannot create {}: {e}", config.out_dir.display())))
}

fn write_file(stage: &'static str, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    std::fs::write(path, bytes)
        .map_err(|e| stage_err(stage, format!("cannot write {}: {e}", path.display())))
}

/// Runs the pure closed loop (no protocol, no attack) and writes the
/// per-step trajectory for inspection and plotting.
pub fn cmd_simulate(config: &PipelineConfig, steps: u64) -> Result<PathBuf, PipelineError> {
    const STAGE: &str = "simulate";
    config.validate()?;
    ensure_out_dir(config, STAGE)?;
    let mut out = String::from("step,time,level,inflow,outflow,pump,valve\n");
    let mut state = PlantState::initial();
    for step in 1..=steps {
        state = plant::closed_loop_step(&state, &config.plant, &config.thresholds);
        writeln!(
            out,
            "{},{:.8e},{:.8e},{:.8e},{:.8e},{},{}",
            step,
            state.time,
            state.level,
            state.inflow,
            state.outflow,
            u8::from(state.pump),
            u8::from(state.valve),
        )
        .expect("writing to a string cannot fail");
    }
    let path = config.path("trajectory.csv");
    write_file(STAGE, &path, out.as_bytes())?;
    Ok(path)
}

fn train_file(intensity: Intensity) -> String {
    format!("fdi_{}_train.csv", intensity.percent_label())
}

fn test_file(intensity: Intensity) -> String {
    format!("fdi_{}_test.csv", intensity.percent_label())
}

fn model_file(intensity: Intensity) -> String {
    format!("model_{}pct.txt", intensity.percent_label())
}

fn grid_file(intensity: Intensity) -> String {
    format!("grid_{}pct.csv", intensity.percent_label())
}

/// Runs every scenario and writes the raw train/test splits:
/// `normal_train`/`normal_test`, one train file per training intensity,
/// and one test file per test intensity.
pub fn cmd_collect(config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    const STAGE: &str = "collect";
    config.validate()?;
    ensure_out_dir(config, STAGE)?;

    struct Plan {
        label: String,
        duration: u64,
        attack: Option<AttackConfig>,
        /// records going to the train file before the rest go to test
        train_take: usize,
        train_name: Option<String>,
        test_name: String,
    }

    let mut plans = vec![Plan {
        label: "scenario:normal".into(),
        duration: (config.train_per_class + config.test_normal) as u64,
        attack: None,
        train_take: config.train_per_class,
        train_name: Some("normal_train.csv".into()),
        test_name: "normal_test.csv".into(),
    }];
    for &intensity in &config.test_intensities {
        let trains = config.train_intensities.contains(&intensity);
        let train_take = if trains { config.train_per_class } else { 0 };
        plans.push(Plan {
            label: format!("scenario:fdi:{intensity}"),
            duration: (train_take + config.test_per_intensity) as u64,
            attack: Some(config.attack(intensity)),
            train_take,
            train_name: trains.then(|| train_file(intensity)),
            test_name: test_file(intensity),
        });
    }

    let outputs: Vec<Result<Vec<(String, Dataset)>, PipelineError>> = plans
        .par_iter()
        .map(|plan| {
            let scenario = ScenarioConfig {
                duration: plan.duration,
                attack: plan.attack.clone(),
                sampling_stride: 1,
                seed: config.scenario_seed(&plan.label),
            };
            let dataset = collect(&scenario, &config.plant, &config.thresholds, &config.registers)
                .map_err(|e| stage_err(STAGE, format!("{}: {e}", plan.label)))?;
            let (train, test) = dataset.split_at(plan.train_take);
            let mut files = Vec::new();
            if let Some(name) = &plan.train_name {
                files.push((name.clone(), train));
            }
            files.push((plan.test_name.clone(), test));
            Ok(files)
        })
        .collect();

    let mut written = Vec::new();
    for result in outputs {
        for (name, dataset) in result? {
            let path = config.path(&name);
            dataset.save(&path).map_err(|e| stage_err(STAGE, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Builds the balanced training sets, grid-searches each, and fits the
/// final model per training intensity with the winning hyperparameters.
pub fn cmd_train(config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    const STAGE: &str = "train";
    config.validate()?;
    ensure_out_dir(config, STAGE)?;
    let grid = config.grid();

    let normal_train =
        Dataset::load(&config.path("normal_train.csv")).map_err(|e| stage_err(STAGE, e))?;

    let mut written = Vec::new();
    for &intensity in &config.train_intensities {
        let attacked = Dataset::load(&config.path(&train_file(intensity)))
            .map_err(|e| stage_err(STAGE, e))?;
        let mut shuffle_rng = seeds::stream(config.seed, &format!("trainset:fdi:{intensity}"));
        let training =
            build_training_set(&normal_train, &attacked, config.train_per_class, &mut shuffle_rng)
                .map_err(|e| stage_err(STAGE, e))?;

        let search = grid_search(
            &training,
            &grid,
            config.folds,
            seeds::derive_seed(config.seed, &format!("grid:fdi:{intensity}")),
        )
        .map_err(|e| forest_err(STAGE, e))?;
        let grid_path = config.path(&grid_file(intensity));
        let mut grid_csv = Vec::new();
        search
            .write_csv(&mut grid_csv)
            .expect("writing to a buffer cannot fail");
        write_file(STAGE, &grid_path, &grid_csv)?;
        written.push(grid_path);

        let forest = fit_forest(
            &training,
            &search.best,
            seeds::derive_seed(config.seed, &format!("model:fdi:{intensity}")),
        )
        .map_err(|e| forest_err(STAGE, e))?;
        let model_path = config.path(&model_file(intensity));
        forest.save(&model_path).map_err(|e| stage_err(STAGE, e))?;
        written.push(model_path);
    }
    Ok(written)
}

/// Assembles the common test set, evaluates every model on it, and
/// writes the per-model reports plus the comparison table.
pub fn cmd_evaluate(config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    const STAGE: &str = "evaluate";
    config.validate()?;
    ensure_out_dir(config, STAGE)?;

    let normal_test =
        Dataset::load(&config.path("normal_test.csv")).map_err(|e| stage_err(STAGE, e))?;
    let mut attacked = BTreeMap::new();
    for &intensity in &config.test_intensities {
        let dataset = Dataset::load(&config.path(&test_file(intensity)))
            .map_err(|e| stage_err(STAGE, e))?;
        attacked.insert(intensity, dataset);
    }
    // the raw training halves, for the disjointness check
    let mut training_material = vec![
        Dataset::load(&config.path("normal_train.csv")).map_err(|e| stage_err(STAGE, e))?,
    ];
    for &intensity in &config.train_intensities {
        training_material.push(
            Dataset::load(&config.path(&train_file(intensity)))
                .map_err(|e| stage_err(STAGE, e))?,
        );
    }
    let training_refs: Vec<&Dataset> = training_material.iter().collect();

    let test_set = build_test_set(
        &normal_test,
        &attacked,
        &config.test_intensities,
        config.test_normal,
        config.test_per_intensity,
        &training_refs,
    )
    .map_err(|e| stage_err(STAGE, e))?;

    let mut written = Vec::new();
    let test_path = config.path("test_set.csv");
    test_set.save(&test_path).map_err(|e| stage_err(STAGE, e))?;
    written.push(test_path);

    let mut reports: BTreeMap<String, EvalReport> = BTreeMap::new();
    for &intensity in &config.train_intensities {
        let forest =
            Forest::load(&config.path(&model_file(intensity))).map_err(|e| stage_err(STAGE, e))?;
        let report = evaluate(&forest, &test_set).map_err(|e| PipelineError::Internal {
            stage: STAGE,
            detail: e.to_string(),
        })?;
        let name = config.model_name(intensity);
        let tag = intensity.percent_label();

        let report_txt = config.path(&format!("report_{tag}pct.txt"));
        write_file(STAGE, &report_txt, report.render(&name).as_bytes())?;
        written.push(report_txt);

        let mut csv = Vec::new();
        report
            .write_csv(&name, &mut csv)
            .expect("writing to a buffer cannot fail");
        let report_csv = config.path(&format!("report_{tag}pct.csv"));
        write_file(STAGE, &report_csv, &csv)?;
        written.push(report_csv);

        reports.insert(name, report);
    }

    let comparison = compare(&reports).ok_or_else(|| PipelineError::Internal {
        stage: STAGE,
        detail: "no models were evaluated".into(),
    })?;
    let mut comparison_csv = Vec::new();
    comparison
        .write_csv(&mut comparison_csv)
        .expect("writing to a buffer cannot fail");
    let csv_path = config.path("comparison.csv");
    write_file(STAGE, &csv_path, &comparison_csv)?;
    written.push(csv_path);
    let txt_path = config.path("comparison.txt");
    write_file(STAGE, &txt_path, format!("{comparison}\n").as_bytes())?;
    written.push(txt_path);

    Ok(written)
}

/// Wall-clock milliseconds per stage of one pipeline run.
#[derive(Debug, Clone, Copy)]
pub struct StageTimings {
    pub collect_ms: u128,
    pub train_ms: u128,
    pub evaluate_ms: u128,
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    /// Every file the stages produced, relative to the output directory.
    pub files: Vec<String>,
    pub timings: StageTimings,
    pub manifest: PathBuf,
}

/// Collect, train, and evaluate under one master seed, then write the
/// run manifest (config echo, seed, file inventory, stage timings).
pub fn cmd_pipeline(config: &PipelineConfig) -> Result<PipelineSummary, PipelineError> {
    let mut files = Vec::new();

    let started = Instant::now();
    files.extend(cmd_collect(config)?);
    let collect_ms = started.elapsed().as_millis();

    let started = Instant::now();
    files.extend(cmd_train(config)?);
    let train_ms = started.elapsed().as_millis();

    let started = Instant::now();
    files.extend(cmd_evaluate(config)?);
    let evaluate_ms = started.elapsed().as_millis();

    let timings = StageTimings {
        collect_ms,
        train_ms,
        evaluate_ms,
    };
    let mut names: Vec<String> = files
        .iter()
        .map(|p| {
            p.file_name()
                .expect("stage outputs are named files")
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    names.sort_unstable();

    let manifest = config.path("manifest.txt");
    write_file("pipeline", &manifest, render_manifest(config, &names, &timings)?.as_bytes())?;
    Ok(PipelineSummary {
        files: names,
        timings,
        manifest,
    })
}

/// Key=value manifest. Lines under the `timing.` prefix are wall-clock
/// measurements and are expected to differ between otherwise identical
/// runs; everything else is reproducible from the seed.
fn render_manifest(
    config: &PipelineConfig,
    files: &[String],
    timings: &StageTimings,
) -> Result<String, PipelineError> {
    let mut out = String::new();
    out.push_str("# tankguard run manifest\n");
    out.push_str("format.version=1\n");
    let mut kv = |key: &str, value: String| {
        out.push_str(key);
        out.push('=');
        out.push_str(&value);
        out.push('\n');
    };
    kv("pipeline.seed", config.seed.to_string());
    kv("plant.pump_max_flow", config.plant.pump_max_flow.to_string());
    kv("plant.tank_section", config.plant.tank_section.to_string());
    kv("plant.outlet_section", config.plant.outlet_section.to_string());
    kv("plant.gravity", config.plant.gravity.to_string());
    kv("plant.dt", config.plant.dt.to_string());
    kv("thresholds.ll", config.thresholds.ll.to_string());
    kv("thresholds.l", config.thresholds.l.to_string());
    kv("thresholds.h", config.thresholds.h.to_string());
    kv("thresholds.hh", config.thresholds.hh.to_string());
    kv("registers.level", config.registers.level_register.to_string());
    kv("registers.inflow", config.registers.inflow_register.to_string());
    kv("registers.outflow", config.registers.outflow_register.to_string());
    kv("registers.pump", config.registers.pump_coil_register.to_string());
    kv("registers.valve", config.registers.valve_coil_register.to_string());
    kv("registers.level_scale", config.registers.fixed_point_scale.to_string());
    kv("registers.flow_scale", config.registers.flow_scale.to_string());
    kv("attack.sign", config.attack_sign.as_str().to_string());
    kv("attack.targets", format_list(&config.attack_targets));
    kv(
        "pipeline.train_intensities",
        format_list(&fractions_of(&config.train_intensities)),
    );
    kv(
        "pipeline.test_intensities",
        format_list(&fractions_of(&config.test_intensities)),
    );
    kv("pipeline.train_per_class", config.train_per_class.to_string());
    kv("pipeline.test_normal", config.test_normal.to_string());
    kv("pipeline.test_per_intensity", config.test_per_intensity.to_string());
    kv("grid.n_trees", format_list(&config.grid_n_trees));
    kv(
        "grid.max_depth",
        config
            .grid_max_depth
            .iter()
            .map(|d| d.map_or("none".to_string(), |v| v.to_string()))
            .collect::<Vec<_>>()
            .join(","),
    );
    kv("grid.min_samples_split", format_list(&config.grid_min_samples_split));
    kv("grid.features_per_split", format_list(&config.grid_features_per_split));
    kv("grid.k", config.folds.to_string());
    kv("timing.collect_ms", timings.collect_ms.to_string());
    kv("timing.train_ms", timings.train_ms.to_string());
    kv("timing.evaluate_ms", timings.evaluate_ms.to_string());
    for name in files {
        let size = std::fs::metadata(config.path(name))
            .map_err(|e| stage_err("pipeline", format!("cannot stat {name}: {e}")))?
            .len();
        kv(&format!("file.{name}"), size.to_string());
    }
    Ok(out)
}
