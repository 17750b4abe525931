use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sqeeg_cli::commands::parse_families;
use sqeeg_cli::{
    cmd_classify, cmd_features, cmd_preprocess, cmd_report, cmd_stats, cmd_synth, exit_code,
    with_threads, ConfigError, Outcome, RunConfig,
};

#[derive(Parser)]
#[command(name = "sqeeg", version, about = "EEG sleep-quality pipeline")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic raw cohort and its manifest.
    Synth,
    /// Filter, reject bad channels and re-reference; write the retention table.
    Preprocess,
    /// Extract feature tables and comodulograms.
    Features {
        /// power, wpli, pac, a comma list, or all.
        #[arg(long, default_value = "all")]
        family: String,
    },
    /// Screen features between groups and write significance masks.
    Stats,
    /// Leave-one-subject-out classification over the masked features.
    Classify,
    /// Render the summary tables.
    Report,
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, ConfigError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => {
            let mut cfg = RunConfig::default();
            cfg.apply_env()?;
            Ok(cfg)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = load_config(cli.config.as_ref())?;
    with_threads(cfg.threads, || match &cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Preprocess => cmd_preprocess(&cfg),
        Command::Features { family } => cmd_features(&cfg, &parse_families(family)?),
        Command::Stats => cmd_stats(&cfg),
        Command::Classify => cmd_classify(&cfg),
        Command::Report => cmd_report(&cfg),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if !outcome.warnings.is_empty() {
                eprintln!("{} warning(s)", outcome.warnings.len());
            }
            println!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
