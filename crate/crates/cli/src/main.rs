//! `gamehedge` — price and hedge game (Israeli) options on binomial
//! trees, with swing, shortfall-risk, transaction-cost and
//! Black-Scholes-approximation tooling.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gamehedge_cli::{commands, config, selftest};

#[derive(Parser)]
#[command(name = "gamehedge", version, about, long_about = None)]
struct Cli {
    /// Output directory for reports (default: $GAMEHEDGE_OUT or ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price a game option; emits the value, rational exercise times and
    /// the seller's hedge table.
    Price {
        #[arg(long)]
        config: PathBuf,
    },
    /// Price a multiple-exercise (swing) game option by the layered
    /// dynamic program.
    Swing {
        #[arg(long)]
        config: PathBuf,
    },
    /// Shortfall risk of an under-funded seller over a capital sweep.
    Shortfall {
        #[arg(long)]
        config: PathBuf,
    },
    /// Price a payoff across refining lattices and fit the convergence
    /// envelope.
    Converge {
        #[arg(long)]
        config: PathBuf,
    },
    /// Skorokhod-embedding Monte Carlo: transported exercise times and
    /// the near-hedging shortfall.
    EmbedMc {
        #[arg(long)]
        config: PathBuf,
    },
    /// Superhedging prices and strategies under bid-ask spreads.
    Txcost {
        /// Instance file (TOML; see the documentation for the schema).
        #[arg(long)]
        instance: PathBuf,
    },
    /// Run the bundled validation battery; nonzero exit on any failure.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Reduced sample counts (same tolerances); a smoke run, not the
        /// release gate.
        #[arg(long)]
        quick: bool,
    },
}

fn out_dir(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| std::env::var_os("GAMEHEDGE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    let out = out_dir(&cli.out);
    match &cli.command {
        Command::Price { config: path } => {
            let cfg: config::PriceConfig = config::load_config(path)?;
            commands::price(&cfg, &out)?;
        }
        Command::Swing { config: path } => {
            let cfg: config::SwingConfig = config::load_config(path)?;
            commands::swing_cmd(&cfg, &out)?;
        }
        Command::Shortfall { config: path } => {
            let cfg: config::ShortfallCliConfig = config::load_config(path)?;
            commands::shortfall_cmd(&cfg, &out)?;
        }
        Command::Converge { config: path } => {
            let cfg: config::ConvergeConfig = config::load_config(path)?;
            commands::converge_cmd(&cfg, &out)?;
        }
        Command::EmbedMc { config: path } => {
            let cfg: config::EmbedMcConfig = config::load_config(path)?;
            commands::embed_mc_cmd(&cfg, &out)?;
        }
        Command::Txcost { instance } => {
            commands::txcost_cmd(instance, &out)?;
        }
        Command::Selftest { seed, quick } => {
            return Ok(selftest::run(&out, *seed, *quick)?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
