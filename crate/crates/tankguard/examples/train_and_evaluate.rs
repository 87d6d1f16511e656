//! The experiment in miniature, all in memory: collect normal and
//! attacked runs, build three balanced training sets (1%, 10%, 20%),
//! fit one forest per set, and evaluate them on a common test set.
//!
//! ```text
//! cargo run --release -p tankguard --example train_and_evaluate
//! ```

use std::collections::BTreeMap;

use tankguard::dataset::{
    build_test_set, build_training_set, collect, Dataset, Intensity, ScenarioConfig,
};
use tankguard::eval::{compare, evaluate};
use tankguard::forest::fit_forest;
use tankguard::pipeline::PipelineConfig;
use tankguard::seeds;
use tankguard::wire::AttackConfig;

fn main() {
    let config = PipelineConfig::default();
    let seed = config.seed;
    let per_class = 200;
    let test_normal = 200;
    let per_intensity = 40;

    let run = |attack: Option<f64>, duration: u64, label: &str| -> Dataset {
        let scenario = match attack {
            None => ScenarioConfig::normal(duration, seeds::derive_seed(seed, label)),
            Some(eps) => ScenarioConfig::attacked(
                duration,
                AttackConfig::level_only(eps, &config.registers),
                seeds::derive_seed(seed, label),
            ),
        };
        collect(&scenario, &config.plant, &config.thresholds, &config.registers).unwrap()
    };

    // one normal run split between training and testing, one attacked
    // run per intensity
    let normal = run(None, (per_class + test_normal) as u64, "normal");
    let (normal_train, normal_test) = normal.split_at(per_class);

    let intensities = [0.01, 0.05, 0.10, 0.15, 0.20];
    let trained = [0.01, 0.10, 0.20];
    let mut attacked_train = BTreeMap::new();
    let mut attacked_test = BTreeMap::new();
    for eps in intensities {
        let key = Intensity::from_fraction(eps).unwrap();
        let train_take = if trained.contains(&eps) { per_class } else { 0 };
        let dataset = run(
            Some(eps),
            (train_take + per_intensity) as u64,
            &format!("fdi:{key}"),
        );
        let (train, test) = dataset.split_at(train_take);
        if train_take > 0 {
            attacked_train.insert(key, train);
        }
        attacked_test.insert(key, test);
    }

    let keys: Vec<Intensity> = intensities
        .iter()
        .map(|f| Intensity::from_fraction(*f).unwrap())
        .collect();
    let training_refs: Vec<&Dataset> = attacked_train.values().chain([&normal_train]).collect();
    let test_set = build_test_set(
        &normal_test,
        &attacked_test,
        &keys,
        test_normal,
        per_intensity,
        &training_refs,
    )
    .unwrap();
    println!(
        "test set: {} samples, composition {:?}\n",
        test_set.len(),
        test_set.scenario_counts()
    );

    let mut reports = BTreeMap::new();
    for (key, attacked) in &attacked_train {
        let mut rng = seeds::stream(seed, &format!("shuffle:{key}"));
        let training = build_training_set(&normal_train, attacked, per_class, &mut rng).unwrap();
        let search = tankguard::forest::grid_search(
            &training,
            &config.grid(),
            config.folds,
            seeds::derive_seed(seed, &format!("grid:{key}")),
        )
        .unwrap();
        let forest = fit_forest(
            &training,
            &search.best,
            seeds::derive_seed(seed, &format!("fit:{key}")),
        )
        .unwrap();
        let report = evaluate(&forest, &test_set).unwrap();

        let name = format!("model {}%", key.percent_label());
        println!("{name}: trained with {:?}", search.best);
        print!("{}", report.render(&name));
        println!();
        reports.insert(name, report);
    }

    println!("{}", compare(&reports).unwrap());
}
