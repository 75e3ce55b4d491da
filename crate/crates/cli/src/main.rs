use std::path::PathBuf;
use std::process::ExitCode;

use aaerec::config::load_config;
use aaerec::corpus::{generate_synthetic, SynthMode, SynthParams};
use aaerec::eval::{run_experiment, write_results};
use aaerec::neural::gradcheck::check_suite;
use clap::{Parser, Subcommand};
use log::info;

/// Adversarial autoencoders and baselines for item recommendation.
#[derive(Debug, Parser)]
#[command(name = "aaerec", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write the results CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic ratings.tsv / meta.tsv pair.
    Synth {
        #[arg(long, value_parser = parse_mode)]
        mode: SynthMode,
        #[arg(long)]
        clusters: usize,
        #[arg(long)]
        docs_per_cluster: usize,
        #[arg(long)]
        items_per_cluster: usize,
        #[arg(long)]
        items_per_doc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the version.
    Version,
}

fn parse_mode(s: &str) -> Result<SynthMode, String> {
    s.parse().map_err(|e: aaerec::Error| e.to_string())
}

const GRADCHECK_CONFIGS: usize = 20;
const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn run(command: Command) -> aaerec::Result<bool> {
    match command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let results = run_experiment(&cfg)?;
            let out = cfg.out.as_deref().expect("config loader requires `out`");
            write_results(&results, out)?;
            info!("wrote {} rows to {}", results.len(), out.display());
        }
        Command::Synth {
            mode,
            clusters,
            docs_per_cluster,
            items_per_cluster,
            items_per_doc,
            seed,
            out,
        } => {
            let files = generate_synthetic(&SynthParams {
                mode,
                n_clusters: clusters,
                docs_per_cluster,
                items_per_cluster,
                items_per_doc,
                seed,
            })?;
            let (ratings, meta) = files.write_to(&out)?;
            info!("wrote {} and {}", ratings.display(), meta.display());
        }
        Command::Gradcheck { seed } => {
            let report = check_suite(seed, GRADCHECK_CONFIGS)?;
            println!("max relative error: {:e}", report.max_rel_error);
            info!(
                "{} coordinates checked, {} skipped at ReLU kinks",
                report.n_checked, report.n_skipped
            );
            return Ok(report.max_rel_error < GRADCHECK_TOLERANCE);
        }
        Command::Version => println!("aaerec {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: gradient check exceeded tolerance {GRADCHECK_TOLERANCE:e}");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
