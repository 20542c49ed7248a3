use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use peregrine_core::scenarios::{self, ExperimentConfig, RunOptions, ScenarioKind, OUTPUT_ENV};

#[derive(Parser)]
#[command(name = "peregrine", version, about = "Dispersive shallow-water experiments on periodic domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `<root>/<scenario>` with the root from the environment.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = OUTPUT_ENV, hide_env_values = true)]
        out_root: Option<PathBuf>,
    },
    /// List the available scenarios.
    ListScenarios,
    /// Parse and check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for k in ScenarioKind::ALL {
                println!("{:<16} {}", k.name(), k.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!("{}: ok ({})", config.display(), cfg.scenario);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            out,
            jobs,
            seed,
            out_root,
        } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out_dir = out
                .or_else(|| cfg.output_dir.clone())
                .or_else(|| out_root.map(|r| r.join(cfg.scenario.name())));
            let opts = RunOptions {
                out_dir: out_dir.clone(),
                jobs,
            };
            let summary = match scenarios::run_scenario(&cfg, &opts) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{}: {e}", cfg.scenario);
                    return ExitCode::from(2);
                }
            };
            for v in &summary.verdicts {
                println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            if let Some(dir) = out_dir {
                println!("outputs in {}", dir.display());
            }
            println!(
                "{}: {} in {:.2}s",
                summary.scenario,
                if summary.passed { "passed" } else { "FAILED" },
                summary.timing.total_seconds
            );
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
