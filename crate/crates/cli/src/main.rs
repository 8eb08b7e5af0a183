//! Command-line front end for the simulate, train, sample, regress, evaluate and report pipeline.

mod commands;
mod config;
mod error;
mod evaluate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use error::CliError;
use swarm_symreg::swarmsim::Behavior;

#[derive(Parser)]
#[command(name = "swarm-symreg", version, about = "Symbolic interaction laws from simulated swarms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; missing keys take the behavior's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// hex, square or boids (overrides the config).
    #[arg(long)]
    behavior: Option<Behavior>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the swarm simulator and log trajectories.
    Simulate {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        duration_s: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the neural edge model to the logged interactions.
    TrainSurrogate {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        max_samples: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Build the regression dataset from the edge model (or the ground-truth law).
    SampleSurrogate {
        #[arg(long)]
        n: Option<usize>,
        /// surrogate or ground_truth
        #[arg(long)]
        source: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run macro-micro evolution on the dataset.
    Regress {
        #[arg(long)]
        population_size: Option<usize>,
        #[arg(long)]
        max_generations: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Score the top expressions against the true law and the edge model.
    Evaluate {
        #[arg(long)]
        top: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Write the ranked table, force curves and operator histograms.
    Report {
        #[arg(long)]
        top: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => CliError::Missing { path: path.clone(), hint: "config file not found".into() },
                _ => CliError::Io { context: format!("reading {}", path.display()), source: e },
            })?;
            ExperimentConfig::from_toml(&text, common.behavior)?
        }
        None => ExperimentConfig::defaults(common.behavior.unwrap_or(Behavior::Hex)),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Simulate { common, .. }
        | Command::TrainSurrogate { common, .. }
        | Command::SampleSurrogate { common, .. }
        | Command::Regress { common, .. }
        | Command::Evaluate { common, .. }
        | Command::Report { common, .. } => common.clone(),
    };
    if let Some(n) = common.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = load_config(&common)?;
    let out = &common.out_dir;
    match cli.command {
        Command::Simulate { runs, duration_s, .. } => {
            cfg.simulation.runs = runs.unwrap_or(cfg.simulation.runs);
            cfg.simulation.duration_s = duration_s.unwrap_or(cfg.simulation.duration_s);
            cfg.validate()?;
            commands::simulate(&cfg, out)
        }
        Command::TrainSurrogate { epochs, max_samples, .. } => {
            cfg.surrogate.epochs = epochs.unwrap_or(cfg.surrogate.epochs);
            cfg.surrogate.max_samples = max_samples.unwrap_or(cfg.surrogate.max_samples);
            cfg.validate()?;
            commands::train(&cfg, out)
        }
        Command::SampleSurrogate { n, source, .. } => {
            cfg.sampling.n = n.unwrap_or(cfg.sampling.n);
            cfg.sampling.source = source.unwrap_or(cfg.sampling.source);
            cfg.validate()?;
            commands::sample(&cfg, out)
        }
        Command::Regress { population_size, max_generations, .. } => {
            cfg.regression.population_size = population_size.unwrap_or(cfg.regression.population_size);
            cfg.regression.max_generations = max_generations.unwrap_or(cfg.regression.max_generations);
            cfg.validate()?;
            commands::regress(&cfg, out)
        }
        Command::Evaluate { top, .. } => {
            cfg.evaluation.top = top.unwrap_or(cfg.evaluation.top);
            cfg.validate()?;
            evaluate::evaluate(&cfg, out)
        }
        Command::Report { top, .. } => {
            cfg.evaluation.top = top.unwrap_or(cfg.evaluation.top);
            cfg.validate()?;
            evaluate::report(&cfg, out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
