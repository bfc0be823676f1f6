//! Config-driven grids of synthetic experiments.
//!
//! Every cell of `models x n_grid x censoring_grid` is repeated with seeds
//! `seed, seed + 1, ...`; repetition `r` uses the same generated data in
//! every cell that shares `n` and the censoring level, so models are
//! compared on paired samples. Cells run on the worker pool and results are
//! reduced in grid order.

use std::path::{Path, PathBuf};
use std::time::Instant;

use hazardnet::glm::{self, Family, GlmConfig};
use hazardnet::metrics;
use hazardnet::npglm::{self, FitConfig};
use hazardnet::synthetic::{self, CensoringPolicy, Distribution, SynthConfig};
use rayon::prelude::*;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Npglm,
    Expglm,
    Wblglm,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Npglm => "npglm",
            ModelKind::Expglm => "expglm",
            ModelKind::Wblglm => "wblglm",
        }
    }
}

fn default_repetitions() -> usize {
    20
}

fn default_threshold() -> f64 {
    1e-4
}

fn default_max_iter() -> usize {
    500
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub dist: Distribution,
    pub models: Vec<ModelKind>,
    pub n_grid: Vec<usize>,
    /// Fraction of each dataset that is censored.
    pub censoring_grid: Vec<f64>,
    pub dim: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Size of an uncensored test set drawn from the same parameters; 0
    /// skips prediction metrics.
    #[serde(default)]
    pub test_size: usize,
    #[serde(default)]
    pub censoring: CensoringPolicy,
    /// Also write per-iteration NP-GLM traces.
    #[serde(default)]
    pub traces: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(format!("sweep config: {m}")));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.models.is_empty() || self.n_grid.is_empty() || self.censoring_grid.is_empty() {
            return bad("models, n_grid and censoring_grid must be non-empty");
        }
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.censoring_grid.iter().any(|c| !(0.0..1.0).contains(c)) {
            return bad("censoring levels must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    model: ModelKind,
    n: usize,
    censoring: f64,
}

#[derive(Debug, Clone, Default)]
struct RepResult {
    weight_mae: f64,
    iterations: f64,
    converged: f64,
    avg_log_likelihood: f64,
    fit_seconds: f64,
    test_mae: Option<f64>,
    test_ci: Option<f64>,
    trace: Vec<f64>,
}

const METRICS: [&str; 7] = [
    "weight_mae",
    "iterations",
    "converged",
    "avg_log_likelihood",
    "fit_seconds",
    "test_mae",
    "test_ci",
];

impl RepResult {
    fn values(&self) -> [Option<f64>; 7] {
        [
            Some(self.weight_mae),
            Some(self.iterations),
            Some(self.converged),
            Some(self.avg_log_likelihood),
            Some(self.fit_seconds),
            self.test_mae,
            self.test_ci,
        ]
    }
}

fn run_rep(config: &ExperimentConfig, cell: Cell, rep: usize) -> hazardnet::Result<RepResult> {
    let seed = config.seed + rep as u64;
    let n_observed = ((cell.n as f64) * (1.0 - cell.censoring)).round() as usize;
    let synth = SynthConfig {
        censoring: config.censoring,
        ..SynthConfig::new(config.dist, n_observed, cell.n - n_observed.min(cell.n), config.dim, seed)
    };
    let generated = synthetic::generate(&synth)?;
    let mut ds = generated.dataset;
    ds.standardize();

    let start = Instant::now();
    let (model, mut result) = match cell.model {
        ModelKind::Npglm => {
            let fit_config = FitConfig {
                threshold: config.threshold,
                max_iter: config.max_iter,
                seed,
                ..FitConfig::default()
            };
            let outcome = npglm::fit(&ds, &fit_config)?;
            let result = RepResult {
                iterations: outcome.iterations as f64,
                converged: f64::from(u8::from(outcome.converged)),
                avg_log_likelihood: outcome.average_log_likelihood().last().copied().unwrap_or(f64::NAN),
                trace: if config.traces { outcome.average_log_likelihood() } else { Vec::new() },
                ..RepResult::default()
            };
            (hazardnet::io::Model::NpGlm(outcome.model), result)
        }
        ModelKind::Expglm | ModelKind::Wblglm => {
            let family = if cell.model == ModelKind::Expglm { Family::Exponential } else { Family::Weibull };
            let fitted = glm::fit_parametric(&ds, family, &GlmConfig::default())?;
            let result = RepResult {
                iterations: 1.0,
                converged: f64::from(u8::from(fitted.converged)),
                avg_log_likelihood: fitted.log_likelihood / ds.len() as f64,
                ..RepResult::default()
            };
            (hazardnet::io::Model::Parametric(fitted.model), result)
        }
    };
    result.fit_seconds = start.elapsed().as_secs_f64();
    let coef = model.raw_coefficients();
    result.weight_mae = coef[..config.dim]
        .iter()
        .zip(&generated.true_w)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / config.dim as f64;

    if config.test_size > 0 {
        let test_config = SynthConfig {
            censoring: CensoringPolicy::Tail,
            ..SynthConfig::new(config.dist, config.test_size, 0, config.dim, seed.wrapping_add(1 << 32))
        };
        let test = synthetic::generate_with_params(&test_config, &generated.true_w, generated.true_b)?.dataset;
        let truth: Vec<(f64, bool)> = test.samples.iter().map(|s| (s.t, s.observed)).collect();
        let predicted = test
            .samples
            .iter()
            .map(|s| model.median(&s.x).map(|e| e.time))
            .collect::<hazardnet::Result<Vec<_>>>()?;
        let report = metrics::evaluate(&truth, &predicted, &[])?;
        result.test_mae = Some(report.mae);
        result.test_ci = report.ci;
    }
    Ok(result)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

pub fn run(path: &Path, repetitions: Option<usize>, out_dir: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("sweep config: {e}")))?;
    if let Some(r) = repetitions {
        config.repetitions = r;
    }
    if let Some(dir) = out_dir {
        config.out_dir = dir;
    }
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;

    let mut cells = Vec::new();
    for &model in &config.models {
        for &n in &config.n_grid {
            for &censoring in &config.censoring_grid {
                cells.push(Cell { model, n, censoring });
            }
        }
    }
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.repetitions).map(move |r| (c, r)))
        .collect();
    log::info!("sweep {:?}: {} cells x {} repetitions", config.name, cells.len(), config.repetitions);
    let results: Vec<hazardnet::Result<RepResult>> =
        tasks.par_iter().map(|&(c, r)| run_rep(&config, cells[c], r)).collect();

    let mut summary = csv::Writer::from_path(config.out_dir.join("summary.csv")).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut header: Vec<String> = ["model", "n", "censoring", "repetitions", "failed", "status"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    let csv_err = |e: csv::Error| CliError::Runtime(e.to_string());
    summary.write_record(&header).map_err(csv_err)?;

    let mut traces = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let reps = &results[c * config.repetitions..(c + 1) * config.repetitions];
        let ok: Vec<&RepResult> = reps.iter().filter_map(|r| r.as_ref().ok()).collect();
        let failures: Vec<String> = reps.iter().filter_map(|r| r.as_ref().err().map(|e| e.to_string())).collect();
        let status = match failures.first() {
            None => "ok".to_string(),
            Some(e) => {
                log::warn!("cell {} n={} censoring={} failed: {e}", cell.model.name(), cell.n, cell.censoring);
                format!("failed: {e}")
            }
        };
        let mut row = vec![
            cell.model.name().to_string(),
            cell.n.to_string(),
            cell.censoring.to_string(),
            config.repetitions.to_string(),
            failures.len().to_string(),
            status,
        ];
        for j in 0..METRICS.len() {
            let vals: Vec<f64> = ok.iter().filter_map(|r| r.values()[j]).collect();
            if vals.is_empty() {
                row.extend([String::new(), String::new()]);
            } else {
                let (m, s) = mean_std(&vals);
                row.extend([fmt(Some(m)), fmt(Some(s))]);
            }
        }
        summary.write_record(&row).map_err(csv_err)?;
        for (rep, r) in reps.iter().enumerate() {
            if let Ok(r) = r {
                for (it, v) in r.trace.iter().enumerate() {
                    traces.push([
                        cell.model.name().to_string(),
                        cell.n.to_string(),
                        cell.censoring.to_string(),
                        rep.to_string(),
                        (it + 1).to_string(),
                        v.to_string(),
                    ]);
                }
            }
        }
    }
    summary.flush()?;
    if config.traces {
        let mut w = csv::Writer::from_path(config.out_dir.join("traces.csv")).map_err(csv_err)?;
        w.write_record(["model", "n", "censoring", "repetition", "iteration", "avg_log_likelihood"])
            .map_err(csv_err)?;
        for t in traces {
            w.write_record(&t).map_err(csv_err)?;
        }
        w.flush()?;
    }
    log::info!("wrote {}", config.out_dir.join("summary.csv").display());
    Ok(())
}
