use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use modelcheck::check::{ljung_box_for_ar, LagRule};
use modelcheck_cli::{
    load_timeseries_csv, run_cumulative, run_experiment, run_watertank, ConfigBuilder, ExperimentConfig,
};

/// Surprisal-based model checks on time series.
#[derive(Parser)]
#[command(name = "check", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replication sweep: `results.csv`, `hist_<method>.csv` and `summary.json`.
    Run(ConfigArgs),
    /// ρ★ ± 2 d★ on growing prefixes of one data set: `trace.csv`.
    Cumulative(ConfigArgs),
    /// Check the water-tank model class on synthetic or measured data.
    Watertank(ConfigArgs),
    /// Ljung-Box test on the residuals of a least-squares AR fit.
    Ljungbox(LjungBoxArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Plain-text file of `key = value` lines.
    config: PathBuf,
    /// Override a setting, e.g. `--set T=1000`; repeatable.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LjungBoxArgs {
    #[arg(long)]
    input: PathBuf,
    /// AR order of the fitted model.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Number of lags; defaults to max(order + 1, round(ln T)).
    #[arg(long)]
    h: Option<usize>,
    /// Name of the series column.
    #[arg(long, default_value = "y")]
    column: String,
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut b = ConfigBuilder::new().file(&args.config)?.env()?;
    for pair in &args.set {
        b = b.assignment(pair)?;
    }
    if let Some(seed) = &args.seed {
        b = b.set("seed", seed)?;
    }
    if let Some(t) = args.threads {
        b = b.set("threads", &t.to_string())?;
    }
    if let Some(o) = &args.output {
        b = b.set("output", &o.to_string_lossy())?;
    }
    Ok(b.build()?)
}

fn with_pool<T: Send>(cfg: &ExperimentConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building the worker pool")?;
    Ok(pool.install(f))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            let files = with_pool(&cfg, || run_experiment(&cfg))??;
            println!("{}", files.results.display());
            println!("{}", files.summary.display());
        }
        Command::Cumulative(args) => {
            let cfg = load_config(&args)?;
            let path = with_pool(&cfg, || run_cumulative(&cfg))??;
            println!("{}", path.display());
        }
        Command::Watertank(args) => {
            let cfg = load_config(&args)?;
            let files = with_pool(&cfg, || run_watertank(&cfg))??;
            println!("{}", files.results.display());
            println!("{}", files.summary.display());
        }
        Command::Ljungbox(args) => {
            let y = load_timeseries_csv(&args.input, None, &args.column)?;
            let rule = args.h.map_or(LagRule::LogLength, LagRule::Fixed);
            let r = ljung_box_for_ar(&y, args.order, rule)?;
            let out = serde_json::json!({ "q": r.q, "h": r.h, "dof": r.h - r.d, "p_value": r.p_value });
            println!("{out}");
        }
    }
    Ok(())
}
