//! `hazardnet` command-line driver.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on invalid arguments
//! or inputs.

mod commands;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "hazardnet", version, about = "Continuous-time relationship prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DistArg {
    Rayleigh,
    Gompertz,
    Exponential,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum CensoringArg {
    Tail,
    Uniform,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregatorArg {
    Stack,
    Expsmooth,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Npglm,
    Expglm,
    Wblglm,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a censored synthetic dataset with known parameters.
    Synth {
        #[arg(long, value_enum)]
        dist: DistArg,
        #[arg(long)]
        n_observed: usize,
        #[arg(long, default_value_t = 0)]
        n_censored: usize,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        dim: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "tail")]
        censoring: CensoringArg,
        /// Dataset CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth JSON; defaults to the output path with `.truth.json`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Build a labeled feature dataset from a temporal graph.
    Features(commands::FeaturesArgs),
    /// Fit a model to a dataset CSV.
    Fit {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        /// Fit on raw feature values.
        #[arg(long)]
        no_standardize: bool,
        /// Free-text time unit stored in the model file.
        #[arg(long, default_value = "")]
        unit: String,
        /// Optional CSV of the per-iteration loss.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Median predictions for every row of a dataset CSV.
    Predict {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer one query for a single feature vector.
    Query {
        #[arg(long)]
        model_file: PathBuf,
        /// Comma-separated feature values, or `row:<i>` to take row `i` of
        /// `--input`.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        input: Option<PathBuf>,
        /// `ranged <a> <b>`, `quantile <alpha>` or `sample <n> <seed>`.
        #[arg(long, num_args = 1..=3, allow_negative_numbers = true, required = true)]
        op: Vec<String>,
        /// Write the answer here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against a labeled dataset.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0])]
        thresholds: Vec<f64>,
        /// JSON report.
        #[arg(long)]
        out: PathBuf,
        /// Optional one-row CSV report.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Run a grid of synthetic experiments from a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<hazardnet::Error> for CliError {
    fn from(e: hazardnet::Error) -> Self {
        use hazardnet::Error as E;
        match e {
            E::Io(_) | E::Overflow | E::NonFiniteObjective | E::ZeroHazardIncrement { .. } | E::NoObservedSamples => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("HAZARDNET_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Usage(format!("HAZARDNET_THREADS must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = thread_pool()?;
    match cli.command {
        Command::Synth {
            dist,
            n_observed,
            n_censored,
            dim,
            seed,
            censoring,
            out,
            truth,
        } => commands::synth(dist, n_observed, n_censored, dim as usize, seed, censoring, &out, truth),
        Command::Features(args) => pool.install(|| commands::features(&args)),
        Command::Fit {
            model,
            input,
            out,
            seed,
            threshold,
            max_iter,
            no_standardize,
            unit,
            trace_out,
        } => commands::fit(commands::FitArgs {
            model,
            input: &input,
            out: &out,
            seed,
            threshold,
            max_iter,
            standardize: !no_standardize,
            unit,
            trace_out: trace_out.as_deref(),
        }),
        Command::Predict { model_file, input, out } => commands::predict(&model_file, &input, &out),
        Command::Query {
            model_file,
            x,
            input,
            op,
            out,
        } => commands::query(&model_file, &x, input.as_deref(), &op, out.as_deref()),
        Command::Eval {
            pred,
            truth,
            thresholds,
            out,
            csv_out,
        } => commands::eval(&pred, &truth, &thresholds, &out, csv_out.as_deref()),
        Command::Sweep {
            config,
            repetitions,
            out_dir,
        } => pool.install(|| sweep::run(&config, repetitions, out_dir)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            log::error!("{msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            log::error!("{msg}");
            ExitCode::from(1)
        }
    }
}
