//! The complete experiment through the pipeline API: collect every
//! scenario, train the three models, evaluate them, and inspect the
//! run directory it leaves behind.
//!
//! ```text
//! cargo run --release -p tankguard --example full_pipeline
//! ```

use tankguard::pipeline::{cmd_pipeline, PipelineConfig};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        out_dir: dir.path().to_path_buf(),
        ..PipelineConfig::default()
    };

    println!(
        "running the full protocol: {}+{} normal samples, train intensities {:?}, \
         test intensities {:?}, seed {}\n",
        config.train_per_class,
        config.test_normal,
        config
            .train_intensities
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>(),
        config
            .test_intensities
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>(),
        config.seed,
    );

    let summary = cmd_pipeline(&config).unwrap();
    println!(
        "stages: collect {} ms, train {} ms, evaluate {} ms",
        summary.timings.collect_ms, summary.timings.train_ms, summary.timings.evaluate_ms
    );

    println!("\nrun directory:");
    for name in &summary.files {
        let size = std::fs::metadata(dir.path().join(name)).unwrap().len();
        println!("  {name:<22} {size:>8} bytes");
    }

    let comparison = std::fs::read_to_string(dir.path().join("comparison.txt")).unwrap();
    println!("\n{comparison}");

    let report = std::fs::read_to_string(dir.path().join("report_20pct.txt")).unwrap();
    println!("{report}");
}
