mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use crashrisk::features::{Coding, PrecipMode, SplitMethod};
use crashrisk::pipeline::FamilyChoice;

use crate::config::RunConfig;
use crate::error::CliError;

/// Crash-count modeling: ingest, fit, compare with a forest, rank commute slots.
#[derive(Debug, Parser)]
#[command(name = "crashrisk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge crash and weather CSVs into the hourly grid.
    Ingest,
    /// Fit Poisson, test dispersion, escalate to NB2; write artifact and tables.
    Fit,
    /// Random-forest estimator sweep; write artifact, sweep and importance tables.
    Forest,
    /// Rank candidate commute slots by expected crash count.
    Rank(RankArgs),
    /// Serve the JSON API (and static assets) for a model artifact.
    Serve,
    /// Write synthetic crash and weather CSVs.
    Synth,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Explicit slot as WEEKDAY:HOUR:MONTH, e.g. FR:8:6. Repeatable.
    #[arg(long = "slot")]
    slots: Vec<String>,
    /// Months to enumerate (comma separated) when no --slot is given.
    #[arg(long, value_delimiter = ',')]
    month: Vec<u8>,
    /// Weekdays to enumerate; all seven by default.
    #[arg(long, value_delimiter = ',')]
    weekday: Vec<String>,
    /// Hours to enumerate; all 24 by default.
    #[arg(long, value_delimiter = ',')]
    hour: Vec<u8>,
    /// Precipitation assumption: 0/1 for indicator models, inches otherwise.
    #[arg(long, default_value_t = 0.0)]
    precip_value: f64,
}

#[derive(Debug, Args)]
struct Flags {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    crash: Option<PathBuf>,
    #[arg(long, global = true)]
    weather: Option<PathBuf>,
    /// Hourly grid CSV (written by `ingest`).
    #[arg(long, global = true)]
    grid: Option<PathBuf>,
    /// Model artifact (written by `fit` or `forest`).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    from: Option<NaiveDate>,
    #[arg(long, global = true)]
    to: Option<NaiveDate>,
    #[arg(long, global = true)]
    coding: Option<CodingArg>,
    #[arg(long, global = true)]
    precip: Option<PrecipArg>,
    #[arg(long, global = true)]
    split_frac: Option<f64>,
    #[arg(long, global = true)]
    split: Option<SplitArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    family: Option<FamilyArg>,
    #[arg(long, global = true)]
    trees: Option<usize>,
    /// Forest sizes, e.g. 1,5,10,25,50,100.
    #[arg(long, global = true, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    #[arg(long, global = true)]
    min_samples_leaf: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Machine-readable stdout.
    #[arg(long, global = true)]
    json: bool,
    /// HOST:PORT for `serve`.
    #[arg(long, global = true)]
    bind: Option<String>,
    /// Static asset directory served at `/`.
    #[arg(long = "static", global = true)]
    static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CodingArg {
    Reference,
    FullDummy,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecipArg {
    Indicator,
    Inches,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Random,
    Chrono,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Auto,
    Poisson,
    Negbin,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone().into();
                }
            };
        }
        set!(crash);
        set!(weather);
        set!(grid);
        set!(model);
        set!(out);
        set!(from);
        set!(to);
        set!(split_frac);
        set!(seed);
        set!(min_samples_leaf);
        set!(bind);
        if let Some(c) = self.coding {
            cfg.coding = match c {
                CodingArg::Reference => Coding::ReferenceCell,
                CodingArg::FullDummy => Coding::FullDummy,
            };
        }
        if let Some(p) = self.precip {
            cfg.precip = match p {
                PrecipArg::Indicator => PrecipMode::Indicator,
                PrecipArg::Inches => PrecipMode::Inches,
            };
        }
        if let Some(s) = self.split {
            cfg.split = match s {
                SplitArg::Random => SplitMethod::Random,
                SplitArg::Chrono => SplitMethod::Chronological,
            };
        }
        if let Some(f) = self.family {
            cfg.family = match f {
                FamilyArg::Auto => FamilyChoice::Auto,
                FamilyArg::Poisson => FamilyChoice::Poisson,
                FamilyArg::Negbin => FamilyChoice::Negbin,
            };
        }
        if self.trees.is_some() {
            cfg.trees = self.trees;
        }
        if self.sweep.is_some() {
            cfg.sweep = self.sweep.clone();
        }
        if self.max_depth.is_some() {
            cfg.max_depth = self.max_depth;
        }
        if self.static_dir.is_some() {
            cfg.static_dir = self.static_dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.flags.resolve()?;
    let json = cli.flags.json;
    match cli.command {
        Command::Ingest => commands::ingest(&cfg, json),
        Command::Fit => commands::fit(&cfg, json),
        Command::Forest => commands::forest(&cfg, json),
        Command::Rank(args) => {
            let slots = commands::rank_slots_from(&args.slots, &args.month, &args.weekday, &args.hour)?;
            commands::rank(&cfg, slots, args.precip_value, json)
        }
        Command::Serve => commands::serve(&cfg),
        Command::Synth => commands::synth(&cfg, json),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("invalid usage");
            eprintln!("{}", CliError::Usage(first.trim_start_matches("error: ").to_string()).to_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
