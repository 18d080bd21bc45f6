//! `sample-transfer`: run experiments, τ sweeps, the task catalog and the
//! grid oracle from the command line.

mod oracle;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use sample_transfer::harness::{
    config_hash, emit_csv, emit_plot_data, run_experiment_with, sweep_tau, ExperimentConfig, ResultTable, CONFIG_KEYS,
};
use sample_transfer::mdp::{chain_task, task_catalog};
use sample_transfer::Error;
use serde::Serialize;

pub const OUT_ENV: &str = "SAMPLE_TRANSFER_OUT";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Parser)]
#[command(name = "sample-transfer", version, about = "Transfer of samples between chain-walk MDPs with fitted Q-iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write CSV, plot data and a manifest.
    Run(RunArgs),
    /// Repeat an experiment for several values of tau.
    SweepTau {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated tau values.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 0.75, 1.0])]
        taus: Vec<f64>,
    },
    /// Print both task sets with all parameters.
    Catalog,
    /// Check a config file and list every violation.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the BAT / BTT solvers with exhaustive lattice search.
    Oracle {
        /// Instance file (TOML).
        instance: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if absent.
    #[arg(long, env = OUT_ENV, default_value = "results")]
    out: PathBuf,
    /// Maximum number of (budget, run) cells in flight.
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Config(Vec<String>),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(v) => Failure::Config(v),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn config_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys:\n");
    for (k, d) in CONFIG_KEYS {
        s.push_str(&format!("  {k:width$}  {d}\n"));
    }
    s.push_str(&format!("\nThe output directory defaults to ${OUT_ENV} when set."));
    s
}

fn command() -> clap::Command {
    let help = config_help();
    Cli::command()
        .after_help(help.clone())
        .mut_subcommand("run", |c| c.after_help(help.clone()))
        .mut_subcommand("sweep-tau", |c| c.after_help(help.clone()))
        .mut_subcommand("validate", |c| c.after_help(help.clone()))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::Config(vec![format!("{}: {e}", path.display())]))?;
    ExperimentConfig::from_toml(&text).map_err(Failure::from)
}

#[derive(Serialize)]
struct Versions {
    sample_transfer: &'static str,
    cli: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    taus: Option<&'a [f64]>,
    files: Vec<String>,
    versions: Versions,
    config: &'a ExperimentConfig,
}

fn write_outputs(command: &str, cfg: &ExperimentConfig, taus: Option<&[f64]>, rt: &ResultTable, out: &Path) -> Result<(), Failure> {
    let mut files = emit_csv(rt, out)?;
    files.extend(emit_plot_data(rt, out)?);
    let manifest = Manifest {
        command,
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        taus,
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        versions: Versions {
            sample_transfer: sample_transfer::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
    let path = out.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    println!("wrote {} rows to {}", rt.len(), out.display());
    Ok(())
}

fn prepare(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.jobs == Some(0) {
        return Err(Failure::Config(vec!["--jobs must be at least 1".into()]));
    }
    Ok(cfg)
}

fn catalog() -> String {
    let mut s = String::new();
    for set in [1u8, 2] {
        let names: Vec<String> = task_catalog(set).unwrap().into_iter().map(|t| t.name).collect();
        s.push_str(&format!("task set {set}: {} (target {})\n", names.join(", "), names[0]));
    }
    s.push_str(&format!("\n{:<5}{:>6}{:>6}{:>6}  {:<12}{:<7}reward regions\n", "task", "p", "l", "eta", "bounds", "gamma"));
    for i in 1..=9 {
        let t = chain_task(i).unwrap();
        let p = &t.params;
        let regions: Vec<String> = p
            .reward_regions
            .iter()
            .map(|r| format!("[{}, {}] -> {}", r.lo, r.hi, r.value))
            .collect();
        s.push_str(&format!(
            "{:<5}{:>6}{:>6}{:>6}  {:<12}{:<7}{}\n",
            t.name,
            p.p,
            p.l,
            p.eta,
            format!("[{}, {}]", p.state_bounds.0, p.state_bounds.1),
            p.gamma,
            regions.join("; ")
        ));
    }
    s
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let cfg = prepare(&args)?;
            let rt = run_experiment_with(&cfg, args.jobs)?;
            write_outputs("run", &cfg, None, &rt, &args.out)
        }
        Command::SweepTau { run, taus } => {
            let cfg = prepare(&run)?;
            if taus.is_empty() {
                return Err(Failure::Config(vec!["--taus must not be empty".into()]));
            }
            let rt = sweep_tau(&cfg, &taus, run.jobs)?;
            write_outputs("sweep-tau", &cfg, Some(&taus), &rt, &run.out)
        }
        Command::Catalog => {
            print!("{}", catalog());
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("ok: {} ({} tasks, config hash {})", config.display(), cfg.num_tasks(), config_hash(&cfg));
            Ok(())
        }
        Command::Oracle { instance } => {
            let text = std::fs::read_to_string(&instance)
                .map_err(|e| Failure::Config(vec![format!("{}: {e}", instance.display())]))?;
            let report = oracle::Instance::parse(&text)?.run()?;
            print!("{}", toml::to_string(&report).map_err(|e| Failure::Runtime(e.to_string()))?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let matches = command().get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(errors)) => {
            eprintln!("configuration errors:");
            for e in errors {
                eprintln!("  {e}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
