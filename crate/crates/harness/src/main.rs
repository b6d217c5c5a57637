use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use zsbench::report::{emit_report, ReportFormat};
use zsbench::runner::{load_result, run_experiment, RunOptions};
use zsbench::validate_config;

/// Compare zero-shot LLM text classification with traditional classifiers.
#[derive(Parser)]
#[command(name = "zsbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write a timestamped run directory.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print (and store) the report of a finished run.
    Report {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: ReportFormat,
    },
}

fn read_config(path: &Path) -> anyhow::Result<zsbench::ExperimentConfig> {
    let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    validate_config(&raw).with_context(|| format!("{}", path.display()))
}

fn config_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { config } => read_config(&config).map(|c| {
            println!("{}: ok ({} predictors)", config.display(), c.predictors.len());
        }),
        Command::Run { config } => read_config(&config).and_then(|c| {
            let output = run_experiment(&c, &RunOptions::new(config_dir(&config)))?;
            print!("{}", emit_report(&output.result, ReportFormat::Markdown)?);
            println!("\nrun directory: {}", output.run_dir.display());
            Ok(())
        }),
        Command::Report { run_dir, format } => load_result(&run_dir).and_then(|result| {
            let text = emit_report(&result, format)?;
            let path = run_dir.join(format.file_name());
            std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
            print!("{text}");
            Ok(())
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
