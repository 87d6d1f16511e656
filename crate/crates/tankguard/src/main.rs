use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use tankguard::dataset::Intensity;
use tankguard::pipeline::{
    cmd_collect, cmd_evaluate, cmd_pipeline, cmd_simulate, cmd_train, PipelineConfig,
    PipelineError,
};

#[derive(Parser)]
#[command(
    name = "tankguard",
    version,
    about = "Water-tank intrusion detection testbed: simulate, attack, train, evaluate"
)]
struct Cli {
    /// key=value config file; every setting has a default
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// master seed for the whole experiment
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// attack intensities (fractions, comma-separated) used for both
    /// training and testing, e.g. `0.01,0.1,0.2`
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    intensity: Option<Vec<f64>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a closed-loop plant trajectory CSV
    Simulate {
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
    },
    /// Run all scenarios and write the raw dataset CSVs
    Collect {
        #[arg(long)]
        train_per_class: Option<usize>,
        #[arg(long)]
        test_normal: Option<usize>,
        #[arg(long)]
        test_per_intensity: Option<usize>,
    },
    /// Build training sets, grid-search, and fit one model per intensity
    Train {
        /// cross-validation fold count
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Evaluate every model on the common test set
    Evaluate,
    /// Collect, train, and evaluate in sequence under one seed
    Pipeline {
        #[arg(long)]
        train_per_class: Option<usize>,
        #[arg(long)]
        test_normal: Option<usize>,
        #[arg(long)]
        test_per_intensity: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
    },
}

fn apply_overrides(config: &mut PipelineConfig, cli: &Cli) -> Result<(), PipelineError> {
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(list) = &cli.intensity {
        let intensities: Vec<Intensity> = list
            .iter()
            .map(|f| {
                Intensity::from_fraction(*f)
                    .ok_or_else(|| PipelineError::Invalid(format!("--intensity: {f} outside [0, 1]")))
            })
            .collect::<Result<_, _>>()?;
        config.train_intensities = intensities.clone();
        config.test_intensities = intensities;
    }
    match &cli.command {
        Command::Collect {
            train_per_class,
            test_normal,
            test_per_intensity,
        }
        | Command::Pipeline {
            train_per_class,
            test_normal,
            test_per_intensity,
            ..
        } => {
            if let Some(v) = train_per_class {
                config.train_per_class = *v;
            }
            if let Some(v) = test_normal {
                config.test_normal = *v;
            }
            if let Some(v) = test_per_intensity {
                config.test_per_intensity = *v;
            }
        }
        _ => {}
    }
    match &cli.command {
        Command::Train { folds } | Command::Pipeline { folds, .. } => {
            if let Some(v) = folds {
                config.folds = *v;
            }
        }
        _ => {}
    }
    config.validate()
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    apply_overrides(&mut config, cli)?;

    match &cli.command {
        Command::Simulate { steps } => {
            let path = cmd_simulate(&config, *steps)?;
            println!("wrote {}", path.display());
        }
        Command::Collect { .. } => {
            for path in cmd_collect(&config)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Train { .. } => {
            for path in cmd_train(&config)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Evaluate => {
            for path in cmd_evaluate(&config)? {
                println!("wrote {}", path.display());
            }
            let comparison = std::fs::read_to_string(config.out_dir.join("comparison.txt"))
                .unwrap_or_default();
            print!("\n{comparison}");
        }
        Command::Pipeline { .. } => {
            let summary = cmd_pipeline(&config)?;
            for name in &summary.files {
                println!("wrote {}", config.out_dir.join(name).display());
            }
            println!("wrote {}", summary.manifest.display());
            println!(
                "\nstage timings: collect {} ms, train {} ms, evaluate {} ms",
                summary.timings.collect_ms,
                summary.timings.train_ms,
                summary.timings.evaluate_ms
            );
            let comparison = std::fs::read_to_string(config.out_dir.join("comparison.txt"))
                .unwrap_or_default();
            print!("\n{comparison}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
