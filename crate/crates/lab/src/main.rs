use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bdes_core::{benchmark_opt, Instance, PlannerConfig};
use bdes_lab::config::ExperimentConfig;
use bdes_lab::presets::{preset, PRESETS};
use bdes_lab::runner::{run_experiment, RunError, RunOptions};
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_FLAGGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bdes",
    version,
    about = "Simulation lab for bandits with deterministically evolving states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file, a manifest, or a preset.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long, env = "BDES_JOBS")]
        jobs: Option<usize>,
    },
    /// Print the benchmark plan of an instance file as JSON.
    Plan {
        #[arg(long)]
        instance: PathBuf,
        /// FPTAS precision (default 1/T).
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        exact_cap: Option<u64>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the built-in presets.
    Presets,
}

fn load(config: Option<PathBuf>, preset_name: Option<String>) -> Result<ExperimentConfig, String> {
    match (config, preset_name) {
        (Some(path), _) => ExperimentConfig::load(&path).map_err(|e| e.to_string()),
        (None, Some(name)) => preset(&name)
            .ok_or_else(|| format!("unknown preset {name:?}; available: {}", PRESETS.join(", "))),
        (None, None) => Err("either --config or --preset is required".into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            preset,
            out,
            jobs,
        } => {
            let config = match load(config, preset) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match run_experiment(&config, &RunOptions { out, jobs }) {
                Ok(outcome) => {
                    println!(
                        "{} replications written to {}",
                        outcome.replications,
                        outcome.out.display()
                    );
                    if outcome.flagged > 0 {
                        eprintln!(
                            "{} replications carry budget flags (see summary.json)",
                            outcome.flagged
                        );
                        return ExitCode::from(EXIT_FLAGGED);
                    }
                    ExitCode::SUCCESS
                }
                Err(RunError::Config(e)) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Plan {
            instance,
            epsilon,
            exact_cap,
        } => match plan(&instance, epsilon, exact_cap) {
            Ok(json) => {
                println!("{json}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(c) => {
                let points = c.sweep().map(|p| p.len()).unwrap_or(0);
                println!(
                    "ok: {} instance(s), {} algo(s), {} seed(s)",
                    points,
                    c.algos.len(),
                    c.seeds.expand().len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Presets => {
            for name in PRESETS {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}

fn plan(path: &PathBuf, epsilon: Option<f64>, exact_cap: Option<u64>) -> anyhow::Result<String> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let instance = Instance::from_json(&text)?;
    let mut config = PlannerConfig {
        epsilon,
        ..PlannerConfig::default()
    };
    if let Some(cap) = exact_cap {
        config.exact_cap = cap;
    }
    let plan = benchmark_opt(&instance.without_noise(), &config)?;
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "method": plan.method,
        "expected_total": plan.expected_total,
        "sequence": plan.sequence,
    }))?)
}
