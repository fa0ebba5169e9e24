//! `acil` command-line interface.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad configuration, 3 dataset
//! missing or unreadable, 4 results file schema mismatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acil_core::config::{self, read_config_file};
use acil_core::datastream::{convert_idx, Source};
use acil_core::harness::{
    aggregate, final_summary, format_aggregate, format_results, format_series, format_summary,
    format_summary_table, read_results, run_sweep, ExperimentConfig, RunResults,
};
use acil_core::io::write_atomic;
use acil_core::selection::Strategy;
use acil_core::Error;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

#[derive(Debug, Parser)]
#[command(
    name = "acil",
    version,
    about = "Active class-incremental learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set budget=250`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (default: `output_dir` key, then $ACIL_OUTPUT_DIR, then ./results).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one strategy.
    Run(ExperimentArgs),
    /// Run several strategies on identical streams.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated strategy ids (default: all).
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
    },
    /// Run the sweep once per exemplar budget.
    BudgetStudy {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated budgets, e.g. `50,100,250`.
        #[arg(long, value_delimiter = ',', required = true)]
        budgets: Vec<String>,
        /// Comma-separated strategy ids (default: all).
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
    },
    /// Convert an IDX image/label pair to the dataset text format.
    ConvertDataset {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep only the first N records.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Turn results CSVs into per-strategy plot series and a summary table.
    Report {
        /// Results CSVs (per-seed schema).
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn classify(err: Error, dataset: Option<&Path>) -> Failure {
    let code = match &err {
        Error::Config { .. } => 2,
        Error::Schema { .. } => 4,
        Error::Io { path, .. } | Error::Parse { path, .. } if Some(path.as_path()) == dataset => 3,
        _ => 1,
    };
    Failure::new(code, err.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(exp) => {
            let (cfg, out) = load_experiment(&exp)?;
            let strategies = [cfg.strategy];
            run_and_write(&cfg, &strategies, &out)
        }
        Command::Sweep { exp, strategies } => {
            let (cfg, out) = load_experiment(&exp)?;
            let strategies = parse_strategies(&strategies)?;
            run_and_write(&cfg, &strategies, &out)
        }
        Command::BudgetStudy {
            exp,
            budgets,
            strategies,
        } => {
            let (cfg, out) = load_experiment(&exp)?;
            let strategies = parse_strategies(&strategies)?;
            budget_study(&cfg, &budgets, &strategies, &out)
        }
        Command::ConvertDataset {
            images,
            labels,
            out,
            limit,
        } => {
            for p in [&images, &labels] {
                if !p.exists() {
                    return Err(Failure::new(3, format!("{}: no such file", p.display())));
                }
            }
            let ds = convert_idx(&images, &labels, &out, limit).map_err(|e| {
                let code = if matches!(e, Error::Parse { .. }) {
                    3
                } else {
                    1
                };
                Failure::new(code, e.to_string())
            })?;
            info!(
                "wrote {} records (d={}, classes={}) to {}",
                ds.records.len(),
                ds.dim,
                ds.num_classes,
                out.display()
            );
            Ok(())
        }
        Command::Report { inputs, out } => report(&inputs, &resolve_out(out, None)),
    }
}

fn resolve_out(flag: Option<PathBuf>, configured: Option<PathBuf>) -> PathBuf {
    flag.or(configured)
        .or_else(|| std::env::var_os("ACIL_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn load_experiment(args: &ExperimentArgs) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let file = match &args.config {
        Some(path) => read_config_file(path).map_err(|e| Failure::new(2, e.to_string()))?,
        None => Vec::new(),
    };
    let overrides = args
        .overrides
        .iter()
        .map(|o| config::parse_override(o))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| classify(e, None))?;
    let cfg = config::build_config(&[&file, &overrides]).map_err(|e| classify(e, None))?;
    if let Source::File(path) = &cfg.stream.source {
        if !path.is_file() {
            return Err(Failure::new(
                3,
                format!("{}: dataset file not found", path.display()),
            ));
        }
    }
    let out = resolve_out(args.out.clone(), cfg.output_dir.clone());
    Ok((cfg, out))
}

fn parse_strategies(ids: &[String]) -> Result<Vec<Strategy>, Failure> {
    if ids.is_empty() {
        return Ok(Strategy::ALL.to_vec());
    }
    ids.iter()
        .map(|s| s.parse::<Strategy>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| classify(e, None))
}

fn dataset_path(cfg: &ExperimentConfig) -> Option<&Path> {
    match &cfg.stream.source {
        Source::File(p) => Some(p.as_path()),
        Source::SyntheticGaussian { .. } => None,
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    write_atomic(path, text.as_bytes()).map_err(|e| Failure::new(1, e.to_string()))
}

fn write_outputs(results: &RunResults, out: &Path) -> Result<(), Failure> {
    let rows = aggregate(&results.records);
    let summary = final_summary(&rows);
    write(&out.join("results.csv"), &format_results(&results.records))?;
    write(&out.join("aggregate.csv"), &format_aggregate(&rows))?;
    write(&out.join("summary.csv"), &format_summary(&summary))?;
    write(&out.join("summary.txt"), &format_summary_table(&summary))?;
    if !results.failures.is_empty() {
        let mut text = String::from("strategy,seed,message\n");
        for f in &results.failures {
            text.push_str(&format!("{},{},{}\n", f.strategy, f.seed, f.message));
        }
        write(&out.join("failures.csv"), &text)?;
    }
    Ok(())
}

fn run_and_write(
    cfg: &ExperimentConfig,
    strategies: &[Strategy],
    out: &Path,
) -> Result<(), Failure> {
    let results = run_sweep(cfg, strategies).map_err(|e| classify(e, dataset_path(cfg)))?;
    write_outputs(&results, out)?;
    info!("wrote results to {}", out.display());
    Ok(())
}

fn budget_study(
    cfg: &ExperimentConfig,
    budgets: &[String],
    strategies: &[Strategy],
    out: &Path,
) -> Result<(), Failure> {
    let budgets = budgets
        .iter()
        .map(|b| match b.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k),
            _ => Err(Failure::new(
                2,
                format!("invalid configuration `budgets`: bad budget {b:?}"),
            )),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = String::from(
        "budget,strategy,num_seeds,mean_final_accuracy,std_final_accuracy,mean_total_annotated,std_total_annotated\n",
    );
    for k in budgets {
        let per_episode = cfg.stream.classes_per_episode
            * (cfg.stream.labeled_per_class + cfg.stream.unlabeled_per_class);
        if k > per_episode {
            warn!("budget {k} exceeds the {per_episode} samples of an episode; exemplar sets will hold the whole pool");
        }
        let at_k = ExperimentConfig {
            budget: k,
            ..cfg.clone()
        };
        let results = run_sweep(&at_k, strategies).map_err(|e| classify(e, dataset_path(cfg)))?;
        write_outputs(&results, &out.join(format!("budget_{k}")))?;
        for row in final_summary(&aggregate(&results.records)) {
            table.push_str(&format!(
                "{k},{},{},{:.9},{:.9},{:.3},{:.3}\n",
                row.strategy,
                row.num_seeds,
                row.accuracy.0,
                row.accuracy.1,
                row.total_annotated.0,
                row.total_annotated.1
            ));
        }
    }
    write(&out.join("annotation_summary.csv"), &table)?;
    info!("wrote budget study to {}", out.display());
    Ok(())
}

fn report(inputs: &[PathBuf], out: &Path) -> Result<(), Failure> {
    if inputs.is_empty() {
        return Err(Failure::new(4, "no results files given"));
    }
    let mut records = Vec::new();
    for path in inputs {
        if !path.is_file() {
            return Err(Failure::new(3, format!("{}: no such file", path.display())));
        }
        records.extend(read_results(path).map_err(|e| classify(e, None))?);
    }
    let rows = aggregate(&records);
    let mut strategies: Vec<Strategy> = rows.iter().map(|r| r.strategy).collect();
    strategies.dedup();
    for s in strategies {
        write(
            &out.join(format!("series_{s}.csv")),
            &format_series(&rows, s),
        )?;
    }
    write(&out.join("aggregate.csv"), &format_aggregate(&rows))?;
    write(
        &out.join("summary.txt"),
        &format_summary_table(&final_summary(&rows)),
    )?;
    info!("wrote report to {}", out.display());
    Ok(())
}
