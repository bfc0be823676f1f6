use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hazardnet::dataset::{self, WindowConfig};
use hazardnet::glm::{self, Family, GlmConfig};
use hazardnet::graph::load_graph;
use hazardnet::io::{self, Model, Prediction, Truth};
use hazardnet::metapath::{dynamic_series, parse_metapath, parse_metapath_file, Multiplicity, PathEvaluator};
use hazardnet::metrics;
use hazardnet::npglm::{self, FitConfig};
use hazardnet::synthetic::{self, CensoringPolicy, Distribution, SynthConfig};
use rand_chacha::rand_core::SeedableRng;
use serde_json::json;

use crate::{AggregatorArg, CensoringArg, CliError, DistArg, ModelArg};

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn distribution(d: DistArg) -> Distribution {
    match d {
        DistArg::Rayleigh => Distribution::Rayleigh,
        DistArg::Gompertz => Distribution::Gompertz,
        DistArg::Exponential => Distribution::Exponential,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn synth(
    dist: DistArg,
    n_observed: usize,
    n_censored: usize,
    dim: usize,
    seed: u64,
    censoring: CensoringArg,
    out: &Path,
    truth: Option<PathBuf>,
) -> Result<(), CliError> {
    let config = SynthConfig {
        censoring: match censoring {
            CensoringArg::Tail => CensoringPolicy::Tail,
            CensoringArg::Uniform => CensoringPolicy::Uniform,
        },
        ..SynthConfig::new(distribution(dist), n_observed, n_censored, dim, seed)
    };
    let generated = synthetic::generate(&config)?;
    io::write_dataset_file(&generated.dataset, out)?;
    let truth_path = truth.unwrap_or_else(|| out.with_extension("truth.json"));
    io::write_json(
        &Truth {
            w: generated.true_w,
            b: generated.true_b,
            dist: config.dist,
            seed,
        },
        &truth_path,
    )?;
    log::info!(
        "wrote {} samples ({} censored) to {}",
        generated.dataset.len(),
        n_censored,
        out.display()
    );
    Ok(())
}

#[derive(clap::Args)]
pub struct FeaturesArgs {
    /// Tab-separated edge list.
    #[arg(long)]
    graph: PathBuf,
    /// JSON schema of node and link types.
    #[arg(long)]
    schema: PathBuf,
    /// Feature meta-paths, one per line, optionally led by `target: <expr>`.
    #[arg(long)]
    metapaths: PathBuf,
    /// Target meta-path; overrides the file's `target:` line.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    t0: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    snapshots: usize,
    #[arg(long)]
    omega: f64,
    #[arg(long, value_enum, default_value = "stack")]
    aggregator: AggregatorArg,
    /// Smoothing factor for `expsmooth`.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Count parallel links once.
    #[arg(long)]
    binary: bool,
    /// Keep only enough censored pairs to make up this fraction.
    #[arg(long)]
    censored_ratio: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional CSV of the raw per-snapshot series.
    #[arg(long)]
    series_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

pub fn features(args: &FeaturesArgs) -> Result<(), CliError> {
    if args.aggregator == AggregatorArg::Expsmooth && !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha {} must lie in (0, 1)", args.alpha)));
    }
    let schema_text = read_text(&args.schema)?;
    let edges = File::open(&args.graph).map_err(|e| CliError::Runtime(format!("{}: {e}", args.graph.display())))?;
    let graph = load_graph(&schema_text, BufReader::new(edges))?;
    let schema = graph.schema();
    let file = parse_metapath_file(&read_text(&args.metapaths)?, schema)?;
    let target = match (&args.target, file.target) {
        (Some(expr), _) => parse_metapath(expr, schema)?,
        (None, Some(t)) => t,
        (None, None) => return Err(CliError::Usage("no target relation given".into())),
    };
    let Some(first) = file.features.first() else {
        return Err(CliError::Usage("meta-path file lists no feature paths".into()));
    };
    if (target.source_type(), target.dest_type()) != (first.source_type(), first.dest_type()) {
        return Err(CliError::Usage(format!(
            "target {} and features {} connect different node types",
            target.type_chain(schema),
            first.type_chain(schema)
        )));
    }
    let window = WindowConfig::from_snapshots(args.t0, args.delta, args.snapshots, args.omega)?;
    let latest = graph.latest_timestamp().unwrap_or(f64::NEG_INFINITY);
    if window.feature_end() > latest {
        return Err(CliError::Usage(format!(
            "feature window ends at {} but the last recorded timestamp is {latest}",
            window.feature_end()
        )));
    }

    let multiplicity = if args.binary { Multiplicity::Binary } else { Multiplicity::Count };
    let evaluator = PathEvaluator::with_options(&graph, multiplicity, true);
    let candidates = dataset::candidate_pairs(&evaluator, &file.features, window.feature_end())?;
    let mut labels = dataset::label_pairs(&evaluator, &target, &window, &candidates)?;
    if let Some(ratio) = args.censored_ratio {
        labels = dataset::subsample_censored(&labels, ratio, args.seed)?;
    }
    let pairs: Vec<(usize, usize)> = labels.iter().map(|l| l.pair).collect();
    let series = dynamic_series(&evaluator, &file.features, &window.plan(), &pairs)?;

    let (src_type, dst_type) = (target.source_type(), target.dest_type());
    let names = |(a, b): (usize, usize)| {
        (graph.node_name(src_type, a).to_string(), graph.node_name(dst_type, b).to_string())
    };
    let mut rows = Vec::with_capacity(series.len());
    for s in &series {
        let x = match args.aggregator {
            AggregatorArg::Stack => dataset::aggregate_stack(s),
            AggregatorArg::Expsmooth => dataset::aggregate_expsmooth(s, args.alpha)?,
        };
        rows.push((names(s.pair), x));
    }
    let labeled = labels.iter().map(|l| (names(l.pair), l.observed, l.t)).collect();
    let ds = dataset::build_dataset(rows, labeled, false)?;
    io::write_dataset_file(&ds, &args.out)?;
    if let Some(path) = &args.series_out {
        io::write_series(&series, names, File::create(path)?)?;
    }
    log::info!(
        "{} labeled pairs ({} observed), {} features",
        ds.len(),
        ds.n_observed(),
        ds.dim
    );
    Ok(())
}

pub struct FitArgs<'a> {
    pub model: ModelArg,
    pub input: &'a Path,
    pub out: &'a Path,
    pub seed: u64,
    pub threshold: f64,
    pub max_iter: usize,
    pub standardize: bool,
    pub unit: String,
    pub trace_out: Option<&'a Path>,
}

pub fn fit(args: FitArgs<'_>) -> Result<(), CliError> {
    let mut ds = io::read_dataset_file(args.input)?;
    if args.standardize {
        ds.standardize();
    }
    let family = match args.model {
        ModelArg::Npglm => None,
        ModelArg::Expglm => Some(Family::Exponential),
        ModelArg::Wblglm => Some(Family::Weibull),
    };
    match family {
        None => {
            let config = FitConfig {
                threshold: args.threshold,
                max_iter: args.max_iter,
                seed: args.seed,
                ..FitConfig::default()
            };
            let outcome = npglm::fit(&ds, &config)?;
            if !outcome.converged {
                log::warn!("no convergence within {} iterations", args.max_iter);
            }
            log::info!(
                "{} iterations, final loss {}",
                outcome.iterations,
                outcome.model.loss_trace.last().copied().unwrap_or(f64::NAN)
            );
            if let Some(path) = args.trace_out {
                let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Runtime(e.to_string()))?;
                let mut write = || -> csv::Result<()> {
                    w.write_record(["iteration", "loss", "avg_log_likelihood"])?;
                    for (i, (l, a)) in outcome
                        .model
                        .loss_trace
                        .iter()
                        .zip(outcome.average_log_likelihood())
                        .enumerate()
                    {
                        w.write_record([(i + 1).to_string(), l.to_string(), a.to_string()])?;
                    }
                    w.flush()?;
                    Ok(())
                };
                write().map_err(|e| CliError::Runtime(e.to_string()))?;
            }
            let mut model = outcome.model;
            model.unit = args.unit;
            io::write_json(&model, args.out)?;
        }
        Some(family) => {
            let fitted = glm::fit_parametric(&ds, family, &GlmConfig::default())?;
            if !fitted.converged {
                log::warn!("optimizer stopped before reaching the gradient tolerance");
            }
            log::info!("log-likelihood {}", fitted.log_likelihood);
            let mut model = fitted.model;
            model.unit = args.unit;
            io::write_json(&model, args.out)?;
        }
    }
    Ok(())
}

fn check_dim(model: &Model, dim: usize) -> Result<(), CliError> {
    if model.dim() != dim {
        return Err(CliError::Usage(format!(
            "model expects {} features but the input has {dim}",
            model.dim()
        )));
    }
    Ok(())
}

pub fn predict(model_file: &Path, input: &Path, out: &Path) -> Result<(), CliError> {
    let model = io::read_model(model_file)?;
    let ds = io::read_dataset_file(input)?;
    check_dim(&model, ds.dim)?;
    let rows = ds
        .samples
        .iter()
        .map(|s| {
            Ok(Prediction {
                src: s.src.clone(),
                dst: s.dst.clone(),
                estimate: model.median(&s.x)?,
            })
        })
        .collect::<hazardnet::Result<Vec<_>>>()?;
    io::write_predictions(&rows, File::create(out)?)?;
    Ok(())
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("cannot parse {what} from {s:?}")))
}

fn feature_vector(x: &str, input: Option<&Path>) -> Result<Vec<f64>, CliError> {
    if let Some(row) = x.strip_prefix("row:") {
        let path = input.ok_or_else(|| CliError::Usage("`row:` references need --input".into()))?;
        let ds = io::read_dataset_file(path)?;
        let i: usize = parse_num(row, "row index")?;
        return ds
            .samples
            .get(i)
            .map(|s| s.x.clone())
            .ok_or_else(|| CliError::Usage(format!("row {i} out of range ({} rows)", ds.len())));
    }
    if x.trim().is_empty() {
        return Ok(Vec::new());
    }
    x.split(',').map(|v| parse_num(v, "feature value")).collect()
}

pub fn query(
    model_file: &Path,
    x: &str,
    input: Option<&Path>,
    op: &[String],
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model = io::read_model(model_file)?;
    let x = feature_vector(x, input)?;
    check_dim(&model, x.len())?;
    let ops: Vec<&str> = op.iter().map(String::as_str).collect();
    let answer = match ops.as_slice() {
        ["ranged", a, b] => {
            let (a, b): (f64, f64) = (parse_num(a, "t_a")?, parse_num(b, "t_b")?);
            if !(0.0 <= a && a <= b) {
                return Err(CliError::Usage(format!("need 0 <= t_a <= t_b, got {a} and {b}")));
            }
            json!({"op": "ranged", "t_a": a, "t_b": b, "probability": model.ranged_probability(&x, a, b)?})
        }
        ["quantile", alpha] => {
            let alpha: f64 = parse_num(alpha, "alpha")?;
            let q = model.quantile(&x, alpha)?;
            json!({"op": "quantile", "alpha": alpha, "time": q.time, "horizon_exceeded": q.horizon_exceeded})
        }
        ["sample", n, seed] => {
            let n: usize = parse_num(n, "sample count")?;
            let seed: u64 = parse_num(seed, "seed")?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let draws = (0..n)
                .map(|_| model.sample_time(&x, &mut rng))
                .collect::<hazardnet::Result<Vec<_>>>()?;
            json!({"op": "sample", "seed": seed, "samples": draws})
        }
        _ => {
            return Err(CliError::Usage(format!(
                "unknown query {:?}; expected `ranged a b`, `quantile alpha` or `sample n seed`",
                ops.join(" ")
            )))
        }
    };
    let text = serde_json::to_string_pretty(&answer).map_err(|e| CliError::Runtime(e.to_string()))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

pub fn eval(
    pred: &Path,
    truth: &Path,
    thresholds: &[f64],
    out: &Path,
    csv_out: Option<&Path>,
) -> Result<(), CliError> {
    let preds = io::read_predictions(File::open(pred)?)?;
    let ds = io::read_dataset_file(truth)?;
    let by_pair: HashMap<(&str, &str), f64> = preds
        .iter()
        .map(|p| ((p.src.as_str(), p.dst.as_str()), p.estimate.time))
        .collect();
    let mut truth_rows = Vec::with_capacity(ds.len());
    let mut predicted = Vec::with_capacity(ds.len());
    for s in &ds.samples {
        let p = by_pair
            .get(&(s.src.as_str(), s.dst.as_str()))
            .ok_or_else(|| CliError::Usage(format!("no prediction for pair ({}, {})", s.src, s.dst)))?;
        truth_rows.push((s.t, s.observed));
        predicted.push(*p);
    }
    let report = metrics::evaluate(&truth_rows, &predicted, thresholds)?;
    io::write_json(&report, out)?;
    if let Some(path) = csv_out {
        std::fs::write(path, format!("{}\n{}\n", report.csv_header(), report.csv_row()))?;
    }
    log::info!("MAE {} CI {:?}", report.mae, report.ci);
    Ok(())
}
