mod offline;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use john_core::osc::OscEndpoint;
use john_core::playback::DEFAULT_TICK_HZ;

/// Semi-conductor for collective improvisation: generates graphic scores,
/// hosts a shared editing session and plays scores out over OSC.
#[derive(Parser)]
#[command(name = "john", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the shared-session server.
    Serve(ServeArgs),
    /// Generate a score from a constraints file.
    Generate {
        #[arg(long)]
        constraints: PathBuf,
        /// Overrides the seed in the constraints file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a score against constraints. Exit 0 if clean, 1 if not.
    Validate {
        #[arg(long)]
        score: PathBuf,
        #[arg(long)]
        constraints: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Play a score to OSC endpoints without a server.
    Play {
        #[arg(long)]
        score: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Start position in score milliseconds.
        #[arg(long, default_value_t = 0)]
        from: u64,
        #[arg(long = "osc", value_name = "HOST:PORT")]
        osc: Vec<OscEndpoint>,
        #[arg(long, default_value_t = DEFAULT_TICK_HZ, value_parser = clap::value_parser!(u32).range(1..=100))]
        tick_hz: u32,
    },
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, env = "JOHN_PORT", default_value_t = 7400)]
    pub port: u16,
    #[arg(long, default_value = "0.0.0.0")]
    pub host: String,
    #[arg(long = "osc", value_name = "HOST:PORT")]
    pub osc: Vec<OscEndpoint>,
    #[arg(long, default_value_t = DEFAULT_TICK_HZ, value_parser = clap::value_parser!(u32).range(1..=100))]
    pub tick_hz: u32,
    /// Initial score.
    #[arg(long)]
    pub score: Option<PathBuf>,
    /// Default constraints offered to clients.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Session log, one accepted message per line.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Seconds of silence after which a client is dropped.
    #[arg(long, default_value_t = 30)]
    pub client_timeout: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(args) => serve::run(args),
        Command::Generate { constraints, seed, out } => offline::generate(&constraints, seed, &out),
        Command::Validate { score, constraints, json } => offline::validate(&score, &constraints, json),
        Command::Play { score, speed, from, osc, tick_hz } => offline::play(&score, speed, from, &osc, tick_hz),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
