use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use loadwatch_cli::config::GlobalConfig;
use loadwatch_cli::manifest::StageManifest;
use loadwatch_cli::service::{load_models, serve, AppState};
use loadwatch_cli::stages;
use loadwatch_cli::CliError;
use loadwatch_core::fixture::FixtureSpec;

#[derive(Parser)]
#[command(name = "loadwatch", version, about = "Injury-risk modelling pipeline for training-load data")]
struct Cli {
    /// Global JSON config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the number of MCCV rounds.
    #[arg(long, global = true)]
    rounds: Option<usize>,
    /// Recompute even when cached, and overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Raw GPS, wellness, match and injury files to the feature store.
    Preprocess,
    /// Sliding windows for every (n_in, n_out) pair of the grid.
    BuildWindows,
    /// Train/test rounds with synthetic balancing of each training split.
    Synth,
    /// Train one cell's model on one round's training split.
    Train {
        #[arg(long)]
        cell: String,
        #[arg(long, default_value_t = 0)]
        round: usize,
    },
    /// Score a saved model on one round's test split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cell: String,
        #[arg(long, default_value_t = 0)]
        round: usize,
    },
    /// Evaluate grid cells over all rounds and write the results tables.
    Grid {
        /// Comma-separated cell ids, e.g. I-1,I-58. Default: all.
        #[arg(long, value_delimiter = ',')]
        cells: Vec<String>,
    },
    /// Serve the read-only HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
    /// Write a synthetic raw dataset and a matching config.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        players: usize,
        #[arg(long, default_value_t = 400)]
        sessions: usize,
        #[arg(long, default_value_t = 12)]
        injuries: usize,
    },
}

fn load_config(cli: &Cli) -> Result<GlobalConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <file> is required".into()))?;
    let mut cfg = GlobalConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(rounds) = cli.rounds {
        cfg.window.rounds = rounds;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(m: &StageManifest) {
    let note = if m.cache_hit { " (cache hit)" } else { "" };
    println!("{}: done in {} ms{note}", m.stage, m.elapsed_ms);
    println!("{}", serde_json::to_string_pretty(&m.summary).expect("summary serializes"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Fixture {
        out,
        players,
        sessions,
        injuries,
    } = &cli.command
    {
        let spec = FixtureSpec {
            players: *players,
            sessions: *sessions,
            injuries: *injuries,
            seed: cli.seed.unwrap_or(FixtureSpec::default().seed),
            ..Default::default()
        };
        if spec.players == 0 || spec.players > 12 {
            return Err(CliError::Config("--players must lie in 1..=12".into()));
        }
        let path = stages::fixture_cmd(out, &spec)?;
        println!("fixture written; config at {}", path.display());
        return Ok(());
    }

    let cfg = load_config(&cli)?;
    let force = cli.force;
    let manifest = match &cli.command {
        Command::Preprocess => stages::preprocess_cmd(&cfg, force)?,
        Command::BuildWindows => stages::build_windows_cmd(&cfg, force)?,
        Command::Synth => stages::synth_cmd(&cfg, force)?,
        Command::Train { cell, round } => stages::train_cmd(&cfg, cell, *round, force)?,
        Command::Evaluate { model, cell, round } => stages::evaluate_cmd(&cfg, model, cell, *round, force)?,
        Command::Grid { cells } => stages::grid_cmd(&cfg, cells, force)?,
        Command::Serve { port } => {
            let state = AppState {
                store: stages::load_store(&cfg)?,
                experiments: stages::load_results(&cfg)?,
                models: load_models(Path::new(&cfg.paths.models))?,
                threshold: cfg.grid.threshold,
            };
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Stage(e.to_string()))?;
            return rt.block_on(serve(state, &cfg.host, port.unwrap_or(cfg.port)));
        }
        Command::Fixture { .. } => unreachable!("handled above"),
    };
    report(&manifest);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
