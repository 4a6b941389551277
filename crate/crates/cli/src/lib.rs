//! `histmatch` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 the run completed but the
//! constraints were not met.

pub mod commands;
pub mod config;
pub mod io;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{AugmentArgs, GridArgs, Globals, JointArgs, MatchArgs, ValidateArgs};
use config::SummaryRef;

pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "histmatch", version, about = "Choose prior hyperparameters by history matching")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, short, global = true, env = "HISTMATCH_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, env = "HISTMATCH_OUT")]
    pub out: Option<PathBuf>,
    /// Overrides `wave.seed`.
    #[arg(long, global = true, env = "HISTMATCH_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "HISTMATCH_THREADS")]
    pub threads: Option<usize>,
    /// Single-threaded run.
    #[arg(long, global = true, env = "HISTMATCH_DETERMINISTIC")]
    pub deterministic: bool,
    /// Score points by direct simulation instead of the emulator.
    #[arg(long, global = true, env = "HISTMATCH_ORACLE")]
    pub oracle: bool,
    /// Write SVG figures where a command makes them optional.
    #[arg(long, global = true, env = "HISTMATCH_PLOTS")]
    pub plots: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the wave-by-wave history match.
    Match {
        /// Start from this bank file instead of simulating one.
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Write the final (possibly augmented) bank as bank.hmb.
        #[arg(long)]
        save_bank: bool,
    },
    /// p-value maps over a grid of a two-dimensional box.
    Grid {
        /// Grid size, e.g. 100x100.
        #[arg(long, value_parser = commands::parse_resolution)]
        resolution: Option<[usize; 2]>,
        /// Points CSV (columns named after the hyperparameters) drawn over the maps.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[arg(long)]
        bank: Option<PathBuf>,
    },
    /// Check hyperparameters by direct prior predictive simulation.
    Validate {
        /// Natural-scale point, comma separated; repeatable.
        #[arg(long = "lambda", value_parser = parse_list)]
        lambdas: Vec<Coords>,
        #[arg(long)]
        sims: Option<usize>,
    },
    /// Joint density-ordered p-value of a point for two summaries.
    Jointcheck {
        #[arg(long, value_parser = parse_list)]
        lambda: Option<Coords>,
        /// Two summaries by label or index, e.g. S1,S2.
        #[arg(long, value_parser = parse_pair)]
        pair: Option<[String; 2]>,
        #[arg(long, value_parser = parse_list)]
        point: Option<Coords>,
        #[arg(long)]
        sims: Option<usize>,
    },
    /// Build, augment or inspect simulation bank files.
    #[command(subcommand)]
    Bank(BankCommand),
}

#[derive(Debug, Subcommand)]
pub enum BankCommand {
    Build {
        #[arg(long)]
        size: Option<usize>,
    },
    Augment {
        #[arg(long)]
        bank: PathBuf,
        /// Points CSV with one column per hyperparameter label.
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        per_point: usize,
        /// Provenance tag for the new rows.
        #[arg(long, default_value_t = 1)]
        wave: u32,
    },
    Inspect {
        #[arg(long)]
        bank: PathBuf,
    },
}

/// A comma-separated list of numbers given as one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Coords(pub Vec<f64>);

fn parse_list(s: &str) -> Result<Coords, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"))).collect::<Result<_, _>>().map(Coords)
}

fn parse_pair(s: &str) -> Result<[String; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated summaries, got '{s}'"))?;
    Ok([a.trim().to_string(), b.trim().to_string()])
}

/// Parses arguments, runs the command and maps failures to exit code 1.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

pub fn execute(cli: Cli) -> Result<i32> {
    let g = &cli.global;
    let threads = if g.deterministic { 1 } else { g.threads.unwrap_or_else(rayon::current_num_threads).max(1) };
    let globals = Globals {
        out: g.out.clone(),
        seed: g.seed,
        threads,
        deterministic: g.deterministic,
        oracle: g.oracle,
        plots: g.plots,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| dispatch(&cli, &globals))
}

fn dispatch(cli: &Cli, g: &Globals) -> Result<i32> {
    if let Command::Bank(BankCommand::Inspect { bank }) = &cli.command {
        return commands::cmd_bank_inspect(bank);
    }
    let path = cli.global.config.as_ref().context("--config is required for this command")?;
    let mut r = config::load(path)?;
    match &cli.command {
        Command::Match { bank, save_bank } => {
            commands::cmd_match(&mut r, g, &MatchArgs { bank: bank.clone(), save_bank: *save_bank })
        }
        Command::Grid { resolution, overlay, bank } => commands::cmd_grid(
            &mut r,
            g,
            &GridArgs { counts: *resolution, overlay: overlay.clone(), bank: bank.clone() },
        ),
        Command::Validate { lambdas, sims } => {
            commands::cmd_validate(&mut r, g, &ValidateArgs { lambdas: lambdas.iter().map(|c| c.0.clone()).collect(), sims: *sims })
        }
        Command::Jointcheck { lambda, pair, point, sims } => {
            let point = match point.as_ref().map(|c| c.0.as_slice()) {
                Some(&[x, y]) => Some([x, y]),
                Some(p) => anyhow::bail!("--point needs two coordinates, got {}", p.len()),
                None => None,
            };
            let pair = pair.as_ref().map(|[a, b]| [parse_ref(a), parse_ref(b)]);
            commands::cmd_jointcheck(&mut r, g, &JointArgs { lambda: lambda.as_ref().map(|c| c.0.clone()), pair, point, sims: *sims })
        }
        Command::Bank(BankCommand::Build { size }) => commands::cmd_bank_build(&mut r, g, *size),
        Command::Bank(BankCommand::Augment { bank, points, per_point, wave }) => commands::cmd_bank_augment(
            &mut r,
            g,
            &AugmentArgs { bank: bank.clone(), points: points.clone(), per_point: *per_point, wave: *wave },
        ),
        Command::Bank(BankCommand::Inspect { .. }) => unreachable!("handled above"),
    }
}

fn parse_ref(s: &str) -> SummaryRef {
    s.parse().expect("infallible")
}
