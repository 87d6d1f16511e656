//! Scenario execution: run the control loop normally and under attack,
//! record what the PLC observes, and persist the labeled samples.
//!
//! ```text
//! cargo run -p tankguard --example collect_dataset
//! ```

use tankguard::dataset::{collect, Dataset, ScenarioConfig};
use tankguard::plant::{PlantParams, Thresholds};
use tankguard::protocol::RegisterMap;
use tankguard::wire::AttackConfig;

fn main() {
    let params = PlantParams::default();
    let thresholds = Thresholds::default();
    let registers = RegisterMap::default();

    let normal = collect(
        &ScenarioConfig::normal(300, 1),
        &params,
        &thresholds,
        &registers,
    )
    .unwrap();
    let attack = AttackConfig::level_only(0.10, &registers);
    let attacked = collect(
        &ScenarioConfig::attacked(300, attack, 2),
        &params,
        &thresholds,
        &registers,
    )
    .unwrap();

    for (name, dataset) in [("normal", &normal), ("fdi 10%", &attacked)] {
        let (negatives, positives) = dataset.class_counts();
        println!(
            "{name:<8} {} samples ({negatives} normal / {positives} anomalous), sources: {:?}",
            dataset.len(),
            dataset.scenario_counts(),
        );
    }

    println!("\nfirst records of each (level, inflow, outflow, pump, valve, label):");
    for (name, dataset) in [("normal", &normal), ("fdi 10%", &attacked)] {
        for (record, provenance) in dataset.iter().take(3) {
            println!(
                "  {name:<8} {provenance:<12} {:>6.3} {:>7.4} {:>7.4} {} {} {}",
                record.level,
                record.inflow,
                record.outflow,
                u8::from(record.pump),
                u8::from(record.valve),
                record.label.as_u8(),
            );
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("attacked.csv");
    attacked.save(&path).unwrap();
    let reloaded = Dataset::load(&path).unwrap();
    assert_eq!(reloaded, attacked);
    println!("\nCSV round-trip ok: {} bytes at {}", std::fs::metadata(&path).unwrap().len(), path.display());
}
