use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jacksonnet_cli::commands;
use jacksonnet_cli::config::RunConfig;
use jacksonnet_cli::csv::{parse_csv, write_collapse_csv, write_csv};
use jacksonnet_cli::error::CliError;

/// Open Jackson network dynamics: exact simulation, truncated-space
/// computation, and closed-form correlation curves, all on one CSV schema.
#[derive(Parser)]
#[command(name = "jacksonnet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (flat `key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config duration.
    #[arg(long)]
    duration: Option<f64>,
    /// Override the omega grid, comma-separated: "0.1,1,10".
    #[arg(long)]
    omega: Option<String>,
    /// Override the worker count (0 = all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check every invariant of the configured network and print derived rates.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Zeroth- and first-order closed-form curves on the probe grid.
    Theory {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Event-driven simulation estimates with sub-run error bars.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exact values on the truncated state space.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compare a theory CSV with a measured CSV: differences, z-scores, and
    /// the two collapse normalizations. Exits 1 when fewer than 95% of the
    /// error-barred points land within 3 standard errors.
    Compare {
        /// Reference CSV, as produced by `theory`.
        theory_csv: PathBuf,
        /// Measured CSV, as produced by `simulate` or `oracle`.
        data_csv: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Append the subtracted and collapse-normalized columns to a CSV.
    Collapse {
        /// Input CSV from any source.
        data_csv: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Validate { common } => {
            let cfg = load_config(&common)?;
            let report = commands::cmd_validate(&cfg)?;
            emit(&common, &report.text)?;
            Ok(if report.ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Theory { common } => {
            let cfg = load_config(&common)?;
            let rows = commands::cmd_theory(&cfg)?;
            emit(&common, &write_csv(&rows))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { common } => {
            let cfg = load_config(&common)?;
            let rows = commands::cmd_simulate(&cfg)?;
            emit(&common, &write_csv(&rows))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { common } => {
            let cfg = load_config(&common)?;
            let rows = commands::cmd_oracle(&cfg)?;
            emit(&common, &write_csv(&rows))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { theory_csv, data_csv, common } => {
            let cfg = load_config(&common)?;
            let theory = parse_csv(&read(&theory_csv)?)?;
            let data = parse_csv(&read(&data_csv)?)?;
            let report = commands::cmd_compare(&cfg, &theory, &data)?;
            emit(&common, &report.csv)?;
            eprintln!("{}", report.summary);
            Ok(if report.ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Collapse { data_csv, common } => {
            let cfg = load_config(&common)?;
            let rows = parse_csv(&read(&data_csv)?)?;
            let collapsed = commands::cmd_collapse(&cfg, &rows)?;
            emit(&common, &write_collapse_csv(&collapsed))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(duration) = common.duration {
        cfg.duration = duration;
    }
    if let Some(workers) = common.workers {
        cfg.workers = workers;
    }
    if let Some(grid) = &common.omega {
        let omegas: Result<Vec<f64>, _> =
            grid.split(',').map(|t| t.trim().parse::<f64>()).collect();
        cfg.omegas = omegas.map_err(|_| CliError::Usage(format!("bad --omega grid `{grid}`")))?;
    }
    Ok(cfg)
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn emit(common: &CommonArgs, text: &str) -> Result<(), CliError> {
    match &common.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}
