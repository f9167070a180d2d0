use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use romkit_cli::commands::{self, output_dir};
use romkit_cli::config::load_config;
use romkit_cli::io::{read_snapshots, write_atomic};
use romkit_cli::CliError;

/// Static POD-DEIM and adaptive AADEIM reduced-order model experiments.
#[derive(Parser)]
#[command(name = "romkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full-order model; writes snapshots.bin and probe series.
    FomRun { config: PathBuf },
    /// Normalized singular values of a snapshot file, globally and per window.
    SvdReport {
        snapshots: PathBuf,
        /// Window width in columns.
        #[arg(long, default_value_t = 7)]
        windows: usize,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train POD + QDEIM on snapshot files and run the static DEIM model.
    RomStatic {
        config: PathBuf,
        /// Training snapshot files (overrides training.snapshots).
        #[arg(long)]
        snapshots: Vec<PathBuf>,
    },
    /// Run the adaptive AADEIM model.
    RomAadeim { config: PathBuf },
    /// Tabulate the summaries of run directories, ordered by label.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(&p, text.as_bytes()),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            // a closed pipe (e.g. `| head`) is not an error
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
            _ => Ok(()),
        },
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::FomRun { config } => {
            let cfg = load_config(&config)?;
            let dir = output_dir(&cfg);
            let traj = commands::fom_run(&cfg, &dir)?;
            println!("{}: {} x {} snapshots in {}", cfg.label(), traj.nrows(), traj.ncols(), dir.display());
        }
        Command::SvdReport { snapshots, windows, out } => {
            let q = read_snapshots(&snapshots)?;
            emit(&commands::svd_report(&q, windows)?, out)?;
        }
        Command::RomStatic { config, snapshots } => {
            let cfg = load_config(&config)?;
            let dir = output_dir(&cfg);
            let s = commands::rom_static(&cfg, &snapshots, &dir)?;
            println!("{}: e = {:e}, {} evaluations, output in {}", s.label, s.error, s.evals.total, dir.display());
        }
        Command::RomAadeim { config } => {
            let cfg = load_config(&config)?;
            let dir = output_dir(&cfg);
            let s = commands::rom_aadeim(&cfg, &dir)?;
            println!("{}: e = {:e}, {} evaluations, output in {}", s.label, s.error, s.evals.total, dir.display());
        }
        Command::Compare { runs, out } => emit(&commands::compare(&runs)?, out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("romkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
