use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sublevel::config::ExperimentConfig;
use sublevel::experiment::{cmd_certify, cmd_connect, cmd_contrast, cmd_train, cmd_verify, Outcome};

#[derive(Parser)]
#[command(name = "sublevel", version, about = "Sublevel-set paths and disconnection certificates")]
struct Cli {
    /// TOML experiment configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for path construction and certificate instances.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Verifier samples per segment.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Sublevel bound; the larger endpoint loss when absent.
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train two endpoints by full-batch gradient descent.
    Train,
    /// Build and verify a sublevel-set path between two endpoints.
    Connect {
        #[arg(long)]
        theta_a: Option<PathBuf>,
        #[arg(long)]
        theta_b: Option<PathBuf>,
    },
    /// Re-verify a stored path.
    Verify {
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long)]
        theta_a: Option<PathBuf>,
        #[arg(long)]
        theta_b: Option<PathBuf>,
    },
    /// Certify disconnected global minima of a width-N network.
    Certify,
    /// Certify at width N, then connect the same pair at width N+1.
    Contrast,
}

fn run(cli: Cli) -> sublevel::Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(samples) = cli.samples {
        cfg.n_samples = samples;
    }
    if cli.alpha.is_some() {
        cfg.alpha = cli.alpha;
    }
    match &cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Connect { theta_a, theta_b } => cmd_connect(&cfg, theta_a.as_deref(), theta_b.as_deref()),
        Command::Verify { path, theta_a, theta_b } => {
            cmd_verify(&cfg, path.as_deref(), theta_a.as_deref(), theta_b.as_deref())
        }
        Command::Certify => cmd_certify(&cfg),
        Command::Contrast => cmd_contrast(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let reason = serde_json::json!({ "error": e.code(), "message": e.to_string() });
            eprintln!("{reason}");
            ExitCode::from(2)
        }
    }
}
