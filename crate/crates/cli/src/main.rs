//! `esfem`: refinement studies and exports driven by a study configuration.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use crate::config::{apply_overrides, parse_table, CliConfig};

pub const OUTPUT_DIR_ENV: &str = "ESFEM_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] esfem::Error),
    #[error("CheckFailed: {0} acceptance criteria failed")]
    Check(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(_) => 1,
            CliError::Config(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "esfem",
    version,
    about = "Surface finite element studies for the heat equation on stationary and evolving surfaces",
    after_help = "\
Exit codes: 0 ok, 1 runtime failure, 2 configuration error, 3 failed criteria under --check.

The output directory is taken from --output-dir, then the ESFEM_OUTPUT_DIR
environment variable, then `output.dir` in the configuration, then `out`.
Every command writes manifest.toml next to its artifacts; it lists the
configuration file, the configuration hash and a SHA-256 per artifact, and
has `status = \"incomplete\"` until the command finishes."
)]
struct Cli {
    /// Study configuration (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set study.degree=2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Shorthand for `--set surface.kind=KIND`.
    #[arg(long, global = true)]
    surface: Option<String>,

    /// Shorthand for `--set study.levels=[..]`, comma separated.
    #[arg(long, value_delimiter = ',', global = true)]
    levels: Vec<usize>,

    /// Shorthand for `--set study.degree=K`.
    #[arg(long, global = true)]
    degree: Option<usize>,

    #[arg(long, env = OUTPUT_DIR_ENV, global = true)]
    output_dir: Option<PathBuf>,

    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Exit with code 3 when an acceptance criterion of the command fails.
    #[arg(long, global = true)]
    check: bool,

    /// More log output; repeat for debug level.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Build the mesh of every level; writes mesh_<level>.vtk and mesh_<level>.txt.
    Mesh,
    /// Solve with the first forcing profile; writes series_<level>.csv
    /// (`step,t,mass,norm_u`) and the final state as final_<level>.csv and .vtk.
    Solve,
    /// Maximal-regularity ratio tables; writes maxreg_<profile>.csv
    /// (`level,h,dt,p,q,norm_dtu,norm_lapu,norm_f,ratio,richardson_ok`) and summary.txt.
    Maxreg,
    /// Discrete Green's function studies; writes green_decay.csv
    /// (`level,h,dt,amplitude,rate,r_squared,samples`), kernel_difference.csv
    /// (`level,h,value,late_fraction,tail_bound`), dyadic.csv
    /// (`level,set,radius,measure,norm,norm_dt`) and summary.txt.
    Greens,
    /// Discrete delta studies; writes delta.csv
    /// (`level,h,source,rate,k,r_squared,consistency`) and summary.txt.
    Delta,
    /// Errors against exact solutions; writes convergence.csv
    /// (`level,h,dt,error,order`) and summary.txt.
    Convergence,
    /// Fitted inequality constants; writes inequalities.csv
    /// (`check,level,h,constant,growth,passed`) and summary.txt.
    Inequalities,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Solve => "solve",
            Command::Maxreg => "maxreg",
            Command::Greens => "greens",
            Command::Delta => "delta",
            Command::Convergence => "convergence",
            Command::Inequalities => "inequalities",
        }
    }
}

fn load_config(cli: &Cli) -> Result<(CliConfig, Option<Vec<u8>>), CliError> {
    let (mut table, raw) = match &cli.config {
        Some(path) => {
            let raw = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let text = String::from_utf8(raw.clone())
                .map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
            (parse_table(&text)?, Some(raw))
        }
        None => (toml::Table::new(), None),
    };
    let mut overrides = Vec::new();
    if let Some(s) = &cli.surface {
        overrides.push(format!("surface.kind={s:?}"));
    }
    if !cli.levels.is_empty() {
        overrides.push(format!("study.levels={:?}", cli.levels));
    }
    if let Some(k) = cli.degree {
        overrides.push(format!("study.degree={k}"));
    }
    overrides.extend(cli.overrides.iter().cloned());
    apply_overrides(&mut table, &overrides)?;
    Ok((CliConfig::from_table(&table)?, raw))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let (cfg, raw) = load_config(cli)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("workers: must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    }
    let dir = cli.output_dir.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let inputs = manifest::Inputs { command: cli.command, config_path: cli.config.clone(), config_bytes: raw };
    manifest::write(&dir, &inputs, &cfg, &[], false)?;
    let outcome = commands::run(cli.command, &cfg, &dir)?;
    manifest::write(&dir, &inputs, &cfg, &outcome.artifacts, true)?;
    for c in &outcome.criteria {
        log::info!("{}", c.line());
    }
    let failed = outcome.criteria.iter().filter(|c| !c.passed).count();
    if cli.check && failed > 0 {
        return Err(CliError::Check(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
