use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use condexp_cli::config::{FILTERS, MODELS};
use condexp_cli::{compare_runs, parse_config, run_experiment, write_comparison, ExperimentConfig, RunError};

/// Bayesian conditional-expectation filtering experiments.
#[derive(Debug, Parser)]
#[command(name = "condexp", version)]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config and write a result bundle.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Bundle directory; beats `output.dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Root for bundles when neither `--out` nor `output.dir` is given.
        #[arg(long, env = "CONDEXP_OUT", hide_env_values = true)]
        out_root: Option<PathBuf>,
    },
    /// Compare bundles against the first one and print a CSV table.
    Compare {
        #[arg(required = true, num_args = 2..)]
        bundles: Vec<PathBuf>,
        /// Write the table to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
    },
    ListModels,
    ListFilters,
}

fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(parse_config(&text)?)
}

fn bundle_dir(config: &ExperimentConfig, path: &Path, out: Option<PathBuf>, root: Option<PathBuf>) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    out.or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| root.unwrap_or_else(|| PathBuf::from("runs")).join(stem))
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run {
            config: path,
            seed,
            out,
            out_root,
        } => {
            let mut config = load(&path)?;
            if let Some(seed) = seed {
                config.seeds.master = seed;
            }
            let dir = bundle_dir(&config, &path, out, out_root);
            let outcome = run_experiment(&config, &dir)?;
            if !cli.quiet {
                let mean_rmse = outcome.rmse.iter().map(|r| r.rmse_vs_truth).sum::<f64>() / outcome.rmse.len() as f64;
                eprintln!(
                    "{} steps, mean analysis RMSE {mean_rmse:.4}, bundle in {}",
                    outcome.steps.len(),
                    dir.display()
                );
            }
        }
        Command::Compare { bundles, out } => {
            let rows = compare_runs(&bundles)?;
            let result = match &out {
                Some(p) => fs::File::create(p).and_then(|f| write_comparison(&rows, std::io::BufWriter::new(f))),
                None => write_comparison(&rows, std::io::stdout().lock()),
            };
            result.map_err(|e| RunError::Io {
                path: out.unwrap_or_else(|| "<stdout>".into()),
                source: e,
            })?;
        }
        Command::Validate { config } => {
            load(&config)?;
            if !cli.quiet {
                println!("{}: ok", config.display());
            }
        }
        Command::ListModels => print_table(MODELS),
        Command::ListFilters => print_table(FILTERS),
    }
    Ok(())
}

fn print_table(rows: &[(&str, &str)]) {
    let mut out = std::io::stdout().lock();
    for (name, about) in rows {
        let _ = writeln!(out, "{name:<20} {about}");
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
