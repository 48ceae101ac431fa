//! `driftmle` command line: assumption checks, single paths, estimates,
//! Monte Carlo grids and the reference tables.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 assumption
//! failure without `--force`, 3 numerical failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use driftmle::Method;

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "driftmle",
    version,
    about = "Drift estimation for ergodic diffusions from high-frequency observations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed (experiment.master_seed).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Base frequency n; also sets the experiment grid to [n].
    #[arg(long, global = true, value_name = "INT")]
    pub n: Option<u64>,
    /// Horizon exponent alpha in (0, 1); also sets the experiment grid to [alpha].
    #[arg(long, global = true, value_name = "FLOAT")]
    pub alpha: Option<f64>,
    #[arg(long, global = true, value_name = "INT")]
    pub replicates: Option<u32>,
    /// euler or milstein.
    #[arg(long, global = true, value_name = "NAME")]
    pub method: Option<Method>,
    /// Output directory (io.out_dir).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Proceed even if assumption checks fail.
    #[arg(long, global = true)]
    pub force: bool,
    /// Report errors on stderr as JSON.
    #[arg(long, global = true)]
    pub json_errors: bool,
    /// Worker threads for replicate simulation (default: all cores).
    #[arg(long, global = true, value_name = "INT")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check assumptions A1-A6 and C7 and summarize the invariant law.
    Check,
    /// Simulate one path and write it to the output directory.
    Simulate,
    /// Estimate theta from a stored path, or from a freshly simulated one.
    Estimate {
        /// Path CSV written by `simulate`.
        #[arg(long, value_name = "PATH")]
        path: Option<PathBuf>,
    },
    /// Run an (n, alpha) grid and write per-replicate CSV and a summary.
    Experiment,
    /// Rerun the reference cases and print them beside the published tables.
    Table {
        /// Reference case 1, 2 or 3 (default: all).
        #[arg(long, value_name = "ID")]
        case: Option<u8>,
        /// Single cell, e.g. `n=5000,alpha=0.9`.
        #[arg(long, value_name = "SPEC")]
        cell: Option<String>,
    },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            n: self.n,
            alpha: self.alpha,
            replicates: self.replicates,
            method: self.method,
            out: self.out.clone(),
        }
    }

    /// File plus flag overrides, completed for the subcommand.
    pub fn effective_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        if let Command::Table { cell, .. } = &self.command {
            if let Some(spec) = cell {
                let (n, alpha) = table::parse_cell(spec)?;
                cfg.experiment.ns = Some(vec![n]);
                cfg.experiment.alphas = Some(vec![alpha]);
            }
            table::complete(&mut cfg)?;
        }
        Ok(cfg)
    }
}

fn execute(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let cfg = cli.effective_config()?;
    let go = |out: &mut (dyn Write + Send)| match &cli.command {
        Command::Check => commands::check(&cfg, cli.force, out),
        Command::Simulate => commands::simulate(&cfg, cli.force, out),
        Command::Estimate { path } => commands::estimate_cmd(&cfg, path.as_deref(), cli.force, out),
        Command::Experiment => commands::experiment(&cfg, cli.force, out),
        Command::Table { case, .. } => {
            let ids: Vec<u8> = match case {
                Some(id) => vec![*id],
                None => driftmle::tables::CASES.iter().map(|c| c.id).collect(),
            };
            table::run(&cfg, &ids, out)
        }
    };
    match cli.threads {
        None => go(out),
        Some(0) => Err(CliError::config("--threads", "must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::config("--threads", e))?
            .install(|| go(out)),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let json_errors = args.iter().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let text = e.to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text).trim_end();
            return report(&CliError::usage(text), json_errors, err);
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => report(&e, cli.json_errors, err),
    }
}

fn report(e: &CliError, json: bool, err: &mut (dyn Write + Send)) -> i32 {
    let _ = if json {
        writeln!(err, "{}", e.to_json())
    } else {
        writeln!(err, "error: {e}")
    };
    e.exit_code()
}
