//! Command-line driver for the `brinkman-vem` solver.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures, 1 when an output cannot be written.

pub mod commands;
pub mod config;
pub mod vtk;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{convergence_csv, run_convergence, run_mesh, run_solve, SolveSummary};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

impl From<brinkman_vem::Error> for CliError {
    fn from(e: brinkman_vem::Error) -> Self {
        use brinkman_vem::Error as E;
        match e {
            E::Factorization(_) | E::Residual { .. } | E::SingularCell { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "brinkman-vem", version, about = "Virtual element solver for the Brinkman equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mesh and write it as mesh-json.
    Mesh {
        #[arg(long)]
        family: String,
        #[arg(long = "n")]
        cells: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// unit-square, cylinder, step, rect(x0, y0, x1, y1), ...
        #[arg(long, default_value = "unit-square")]
        domain: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Solve the problem of a run configuration.
    Solve {
        config: PathBuf,
        #[arg(long)]
        vtk: Option<PathBuf>,
        /// DOF dump.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Error history of a manufactured case over a mesh ladder.
    Convergence {
        config: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        /// Comma-separated viscosities; one table per value.
        #[arg(long, value_delimiter = ',')]
        nu_sweep: Vec<f64>,
        /// CSV destination, stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Runs one parsed command line, printing a report to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Mesh { family, cells, seed, domain, output } => {
            let mesh = run_mesh(&family, cells, seed, &domain, &output)?;
            println!("wrote {} cells to {}", mesh.num_cells(), output.display());
        }
        Command::Solve { config, vtk, csv } => {
            let mut config = RunConfig::load(&config)?;
            if vtk.is_some() {
                config.output.vtk = vtk;
            }
            if csv.is_some() {
                config.output.csv = csv;
            }
            print!("{}", run_solve(&config)?);
        }
        Command::Convergence { config, levels, nu_sweep, output } => {
            let config = RunConfig::load(&config)?;
            let table = run_convergence(&config, levels, &nu_sweep)?;
            match output.or(config.output.csv.clone()) {
                Some(path) => {
                    std::fs::write(&path, table)
                        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?
                }
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}
