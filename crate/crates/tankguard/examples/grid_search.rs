//! Hyperparameter selection: stratified 5-fold cross-validation over
//! the default grid on one balanced training set.
//!
//! ```text
//! cargo run --release -p tankguard --example grid_search
//! ```

use tankguard::dataset::{build_training_set, collect, ScenarioConfig};
use tankguard::forest::grid_search;
use tankguard::pipeline::PipelineConfig;
use tankguard::seeds;
use tankguard::wire::AttackConfig;

fn main() {
    let config = PipelineConfig::default();
    let per_class = 250;

    let normal = collect(
        &ScenarioConfig::normal(per_class as u64, 11),
        &config.plant,
        &config.thresholds,
        &config.registers,
    )
    .unwrap();
    let attack = AttackConfig::level_only(0.10, &config.registers);
    let attacked = collect(
        &ScenarioConfig::attacked(per_class as u64, attack, 12),
        &config.plant,
        &config.thresholds,
        &config.registers,
    )
    .unwrap();
    let mut rng = seeds::stream(config.seed, "example:trainset");
    let training = build_training_set(&normal, &attacked, per_class, &mut rng).unwrap();

    println!(
        "grid search over {} cells, {}-fold stratified CV, {} training samples\n",
        config.grid().len(),
        config.folds,
        training.len(),
    );
    let result = grid_search(&training, &config.grid(), config.folds, config.seed).unwrap();

    println!("trees  depth  min_split  m  mean accuracy");
    for cell in &result.cells {
        let marker = if cell.params == result.best { "  <- best" } else { "" };
        println!(
            "{:>5}  {:>5}  {:>9}  {}  {:>13.3}{marker}",
            cell.params.n_trees,
            cell.params.depth_label(),
            cell.params.min_samples_split,
            cell.params.features_per_split,
            cell.mean_accuracy,
        );
    }
}
