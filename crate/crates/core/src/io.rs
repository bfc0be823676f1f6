//! File formats.
//!
//! * dataset CSV: `src,dst,y,t,x_0,...,x_{d-1}` with raw feature values;
//! * predictions CSV: `src,dst,median,horizon_exceeded`;
//! * series CSV: `src,dst,snapshot,feat_0,...` (snapshot 0 is the baseline);
//! * model and ground-truth JSON.
//!
//! Floats are written in shortest round-trip form, so reading a written
//! file reproduces the values exactly.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::glm::ParametricGlmModel;
use crate::metapath::PairSeries;
use crate::npglm::{NpGlmModel, TimeEstimate};
use crate::synthetic::Distribution;

pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["src".to_string(), "dst".into(), "y".into(), "t".into()];
    header.extend((0..dataset.dim).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    for (i, s) in dataset.samples.iter().enumerate() {
        let mut rec = vec![s.src.clone(), s.dst.clone(), u8::from(s.observed).to_string(), s.t.to_string()];
        rec.extend(dataset.raw_x(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} {field:?}")))
}

/// Reads a dataset CSV. Features are left unstandardized.
pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let fixed = ["src", "dst", "y", "t"];
    if header.len() < 4 || header.iter().take(4).ne(fixed) {
        return Err(Error::Parse("dataset header must start with src,dst,y,t".into()));
    }
    let dim = header.len() - 4;
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let observed = match rec[2].trim() {
            "1" => true,
            "0" => false,
            other => return Err(Error::Parse(format!("line {line}: y must be 0 or 1, got {other:?}"))),
        };
        samples.push(LabeledSample {
            src: rec[0].to_string(),
            dst: rec[1].to_string(),
            observed,
            t: parse_f64(&rec[3], line, "time")?,
            x: (4..rec.len())
                .map(|j| parse_f64(&rec[j], line, "feature"))
                .collect::<Result<_>>()?,
        });
    }
    Dataset::new(samples, dim)
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?)
}

pub fn write_dataset_file(dataset: &Dataset, path: &Path) -> Result<()> {
    write_dataset(dataset, std::fs::File::create(path)?)
}

/// Generating parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub w: Vec<f64>,
    pub b: f64,
    pub dist: Distribution,
    pub seed: u64,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Any fitted model. Parametric models are recognized by their `family`
/// field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Model {
    Parametric(ParametricGlmModel),
    NpGlm(NpGlmModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Parametric(m) => m.dim(),
            Model::NpGlm(m) => m.dim(),
        }
    }

    pub fn median(&self, x: &[f64]) -> Result<TimeEstimate> {
        self.quantile(x, 0.5)
    }

    pub fn quantile(&self, x: &[f64], alpha: f64) -> Result<TimeEstimate> {
        match self {
            Model::Parametric(m) => Ok(TimeEstimate {
                time: m.quantile(x, alpha)?,
                horizon_exceeded: false,
            }),
            Model::NpGlm(m) => m.quantile(x, alpha),
        }
    }

    pub fn ranged_probability(&self, x: &[f64], t_a: f64, t_b: f64) -> Result<f64> {
        match self {
            Model::Parametric(m) => m.ranged_probability(x, t_a, t_b),
            Model::NpGlm(m) => m.ranged_probability(x, t_a, t_b),
        }
    }

    /// Inverse-transform draw of an event time.
    pub fn sample_time<R: rand::Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<TimeEstimate> {
        match self {
            Model::Parametric(m) => {
                let u: f64 = rand::distr::Distribution::sample(&rand::distr::Open01, rng);
                Ok(TimeEstimate {
                    time: (-u.ln() / m.linear_predictor(x)?.exp()).powf(1.0 / m.shape),
                    horizon_exceeded: false,
                })
            }
            Model::NpGlm(m) => m.sample_time(x, rng),
        }
    }

    pub fn raw_coefficients(&self) -> Vec<f64> {
        match self {
            Model::Parametric(m) => m.raw_coefficients(),
            Model::NpGlm(m) => m.raw_coefficients(),
        }
    }
}

pub fn read_model(path: &Path) -> Result<Model> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if value.get("family").is_some() {
        Ok(Model::Parametric(serde_json::from_value(value)?))
    } else {
        Ok(Model::NpGlm(serde_json::from_value(value)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub src: String,
    pub dst: String,
    pub estimate: TimeEstimate,
}

pub fn write_predictions<W: Write>(rows: &[Prediction], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["src", "dst", "median", "horizon_exceeded"])?;
    for p in rows {
        w.write_record([
            p.src.as_str(),
            p.dst.as_str(),
            &p.estimate.time.to_string(),
            if p.estimate.horizon_exceeded { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(input: R) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(Error::Parse(format!("line {line}: expected 4 fields")));
        }
        out.push(Prediction {
            src: rec[0].to_string(),
            dst: rec[1].to_string(),
            estimate: TimeEstimate {
                time: parse_f64(&rec[2], line, "median")?,
                horizon_exceeded: &rec[3] == "1",
            },
        });
    }
    Ok(out)
}

/// One row per snapshot; row 0 holds the counts at the window start, the
/// following rows the per-interval differences.
pub fn write_series<W: Write>(
    series: &[PairSeries],
    names: impl Fn((usize, usize)) -> (String, String),
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = series.first().map_or(0, PairSeries::dim);
    let mut header = vec!["src".to_string(), "dst".into(), "snapshot".into()];
    header.extend((0..dim).map(|j| format!("feat_{j}")));
    w.write_record(&header)?;
    for s in series {
        let (src, dst) = names(s.pair);
        let rows = std::iter::once(&s.baseline).chain(&s.series);
        for (i, row) in rows.enumerate() {
            let mut rec = vec![src.clone(), dst.clone(), i.to_string()];
            rec.extend(row.iter().map(i64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
