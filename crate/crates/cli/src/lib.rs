//! Command-line surface for the early-detection toolkit: simulate cohorts, fit models,
//! evaluate time-dependent AUCs and reproduce the expected-AUC tables.

pub mod commands;
pub mod config;
pub mod fitfile;
pub mod io;
pub mod reference;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

pub use config::{Config, UsageError, WORKERS_ENV};

#[derive(Debug, Parser)]
#[command(name = "earlydetect", version, about = "Longitudinal biomarker early-detection models")]
pub struct Cli {
    /// Flat key = value config file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: $EARLYDETECT_WORKERS, then all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Extra config override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate training and testing cohorts.
    Simulate(SimulateArgs),
    /// Fit one method and write a fit file.
    Fit(FitArgs),
    /// Time-dependent AUCs with optional bootstrap intervals and ROC points.
    Evaluate(EvaluateArgs),
    /// Expected AUC over simulation replicates for every method and cutoff.
    ReproduceTables(ReproduceArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Evaluate(_) => "evaluate",
            Command::ReproduceTables(_) => "reproduce-tables",
        }
    }

    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut put = |k: &'static str, x: Option<String>| {
            if let Some(x) = x {
                v.push((k, x));
            }
        };
        let s = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        match self {
            Command::Simulate(a) => {
                a.cohort.put(&mut put);
                put("pool", s(&a.pool));
                put("out_dir", s(&a.out_dir));
            }
            Command::Fit(a) => {
                put("data", a.data.clone());
                put("method", a.method.clone());
                put("split", a.split.clone());
                put("out", s(&a.out));
                put("log_transform", a.log_transform.then(|| "true".into()));
            }
            Command::Evaluate(a) => {
                put("data", a.data.clone());
                put("method", a.method.clone());
                put("risk_table", s(&a.risk_table));
                put("validation", a.validation.clone());
                put("k", a.k.map(|x| x.to_string()));
                put("bootstrap", a.bootstrap.map(|x| x.to_string()));
                put("seed", a.seed.map(|x| x.to_string()));
                put("cutoffs", a.cutoffs.clone());
                put("out", s(&a.out));
                put("roc_out", s(&a.roc_out));
                put("risk_out", s(&a.risk_out));
                put("log_transform", a.log_transform.then(|| "true".into()));
            }
            Command::ReproduceTables(a) => {
                a.cohort.put(&mut put);
                put("replicates", a.replicates.map(|x| x.to_string()));
                put("methods", a.methods.clone());
                put("cutoffs", a.cutoffs.clone());
                put("reference", a.reference.clone());
                put("out", s(&a.out));
                put("csv_out", s(&a.csv_out));
            }
        }
        v
    }
}

#[derive(Debug, Args)]
pub struct CohortArgs {
    /// 1 (changepoint truth) or 2 (spline truth).
    #[arg(long)]
    pub scenario: Option<String>,
    /// annual, biannual or quarterly (reproduce-tables also takes a list or `all`).
    #[arg(long)]
    pub frequency: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cases per split (scenario 1).
    #[arg(long)]
    pub n_cases: Option<usize>,
    /// Controls per split (scenario 1).
    #[arg(long)]
    pub n_controls: Option<usize>,
    /// Subjects per split (scenario 2).
    #[arg(long)]
    pub n_total: Option<usize>,
}

impl CohortArgs {
    fn put(&self, put: &mut impl FnMut(&'static str, Option<String>)) {
        put("scenario", self.scenario.clone());
        put("frequency", self.frequency.clone());
        put("seed", self.seed.map(|x| x.to_string()));
        put("n_cases", self.n_cases.map(|x| x.to_string()));
        put("n_controls", self.n_controls.map(|x| x.to_string()));
        put("n_total", self.n_total.map(|x| x.to_string()));
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub cohort: CohortArgs,
    /// CSV of empirical (gap_years, age_years) pairs.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset CSV path(s), comma-separated.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub method: Option<String>,
    /// train (default), test or all.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Values are raw biomarker levels; take natural logs on read.
    #[arg(long)]
    pub log_transform: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: Option<String>,
    /// One or more methods, comma-separated.
    #[arg(long)]
    pub method: Option<String>,
    /// Precomputed risk table CSV instead of data + method.
    #[arg(long)]
    pub risk_table: Option<PathBuf>,
    /// split, loocv or kfold.
    #[arg(long)]
    pub validation: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Bootstrap replicates; 0 disables intervals.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated cutoffs in years.
    #[arg(long)]
    pub cutoffs: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
    #[arg(long)]
    pub risk_out: Option<PathBuf>,
    #[arg(long)]
    pub log_transform: bool,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[command(flatten)]
    pub cohort: CohortArgs,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated methods or `all`.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub cutoffs: Option<String>,
    /// Reference CSV path, or `none` to drop the diff column.
    #[arg(long)]
    pub reference: Option<String>,
    /// Markdown output (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

/// Resolve the effective config: file, then command flags, then `--set`, then
/// `--workers`.
pub fn resolve_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::new(),
    };
    for (k, v) in cli.command.overrides() {
        cfg.set(k, v)?;
    }
    cfg.apply_overrides(cli.set.iter().map(|s| s.as_str()))?;
    if let Some(w) = cli.workers {
        cfg.set("workers", w.to_string())?;
    }
    Ok(cfg)
}

/// Run `f` on a pool of `workers` threads (`None`: rayon's default size).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    let pool = b.build()?;
    Ok(pool.install(f))
}

pub fn execute(command: &str, cfg: &Config) -> Result<()> {
    with_workers(cfg.workers()?, || match command {
        "simulate" => commands::cmd_simulate(cfg),
        "fit" => commands::cmd_fit(cfg),
        "evaluate" => commands::cmd_evaluate(cfg),
        "reproduce-tables" => commands::cmd_reproduce_tables(cfg),
        other => Err(config::usage(format!("unknown command '{other}'"))),
    })?
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    execute(cli.command.name(), &cfg)
}

/// 2 for usage and input errors, 3 for numerical failures.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use earlydetect_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidArgument(_) | E::InvalidData(_) | E::DimensionMismatch(_) => 2,
                _ => 3,
            };
        }
    }
    3
}
