use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use polaron_core::dressing::DressingMap;
use polaron_core::phasespace::PhasePoint;
use polaron_lab::experiments::{classical_form_factors, initial_state};
use polaron_lab::{plot, run, RunConfig, RunError};

#[derive(Parser)]
#[command(name = "polaron-lab", version, about = "Run polaron experiments and plot their tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments listed in a TOML config.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Apply the dressing map D(θ) to a state and print the result as JSON.
    Dress {
        /// Config supplying the model and grid (and the state, if none is given).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        theta: f64,
        /// JSON record {"q": [...], "p": [...], "alpha": [re, im, ...]}.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Render a CSV artifact as an SVG line plot.
    Plot {
        csv: PathBuf,
        /// Defaults to the CSV path with an .svg extension.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn dress(config: PathBuf, theta: f64, state: Option<PathBuf>) -> Result<(), RunError> {
    let cfg = RunConfig::load(&config)?;
    let numerical = |message: String| RunError::Numerical {
        message,
        dir: PathBuf::from("."),
    };
    let ff = classical_form_factors(&cfg).map_err(|e| numerical(e.to_string()))?;
    let u = match state {
        Some(path) => {
            let text = std::fs::read_to_string(&path)?;
            serde_json::from_str::<PhasePoint>(&text).map_err(|e| {
                RunError::Config(polaron_lab::ConfigError::Invalid {
                    path: path.clone(),
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                })
            })?
        }
        None => initial_state(&cfg, &ff),
    };
    let moved = DressingMap::new(theta, &ff).apply(&u).map_err(|e| numerical(e.to_string()))?;
    println!("{}", serde_json::to_string(&moved).expect("state serializes"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output } => RunConfig::load(&config)
            .map_err(RunError::from)
            .and_then(|mut cfg| {
                if let Some(o) = output {
                    cfg.output = o;
                }
                run(&cfg)
            })
            .map(|s| {
                if let Some(s) = s {
                    log::info!("wrote {} artifacts to {}", s.manifest.artifacts.len(), s.dir.display());
                }
            }),
        Command::Dress { config, theta, state } => dress(config, theta, state),
        Command::Plot { csv, output } => {
            let svg = output.unwrap_or_else(|| csv.with_extension("svg"));
            return match plot::plot_file(&csv, &svg).with_context(|| format!("plotting {}", csv.display())) {
                Ok(schema) => {
                    log::info!("{schema:?} plot written to {}", svg.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(2)
                }
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
