use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gfnoma_cli::config::{parse_config, ExperimentConfig, Sweep};
use gfnoma_cli::{emit_csv, selftest, summary, write_csv, CliError, SelftestOptions};
use gfnoma_core::harness::run_experiment;

/// SER experiments for grant-free NOMA activity and data detection.
#[derive(Debug, Parser)]
#[command(name = "gfnoma", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML, or JSON); defaults apply without one.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination; standard output when absent.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, env = "GFNOMA_SEED")]
    seed: Option<u64>,
    /// Worker threads; all cores when absent. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// All detectors at the base configuration.
    Run,
    /// SER against SNR.
    SweepSnr,
    /// SER after each outer iteration.
    SweepIter,
    /// SER against the activity rate.
    SweepPa,
    /// Oracle comparisons and equation checks.
    Selftest {
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_psi: f64,
    },
}

fn experiment(cli: &Cli, sweep: Sweep) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if cli.threads == Some(0) {
        return Err(CliError::Config("threads: must be at least 1".into()));
    }
    let spec = cfg.spec(sweep)?;
    log::info!(
        "{} trials x {} points, detectors {:?}, seed {}",
        spec.num_trials,
        spec.values.len(),
        spec.detectors,
        spec.master_seed
    );
    let start = std::time::Instant::now();
    let curves = run_experiment(&spec, cli.threads)?;
    log::info!("finished in {:.2?}", start.elapsed());
    match &cli.output {
        Some(path) => {
            emit_csv(&curves, path)?;
            print!("{}", summary(&curves));
        }
        None => {
            write_csv(&curves, std::io::stdout().lock())?;
            eprint!("{}", summary(&curves));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Run => experiment(&cli, Sweep::Single),
        Command::SweepSnr => experiment(&cli, Sweep::Snr),
        Command::SweepIter => experiment(&cli, Sweep::Iteration),
        Command::SweepPa => experiment(&cli, Sweep::ActivityRate),
        Command::Selftest { perturb_psi } => {
            let start = std::time::Instant::now();
            selftest(SelftestOptions { perturb_psi }).and_then(|report| {
                print!("{}", report.render());
                println!("self-test finished in {:.2?}", start.elapsed());
                if report.passed() {
                    Ok(())
                } else {
                    Err(CliError::Selftest("one or more checks failed".into()))
                }
            })
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gfnoma: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
