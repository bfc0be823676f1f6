//! Labeled survival datasets.
//!
//! The recorded interval `(t0, t1]` is split into a feature window of length
//! `phi = k * delta` and an observation window of length `omega`. A candidate
//! pair whose target relation first forms inside the observation window is
//! an observed sample with `t = t_r - (t0 + phi)`; a pair that never forms it
//! by `t1` is censored with `t = omega`; a pair that already formed it is
//! dropped.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metapath::{MetaPath, PairSeries, PathEvaluator, SnapshotPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub t0: f64,
    pub phi: f64,
    pub omega: f64,
    pub delta: f64,
    pub k: usize,
}

impl WindowConfig {
    pub fn new(t0: f64, phi: f64, omega: f64, delta: f64, k: usize) -> Result<Self> {
        if !(phi > 0.0 && omega > 0.0 && delta > 0.0) || k == 0 {
            return Err(Error::InvalidArgument(
                "phi, omega and delta must be positive and k >= 1".into(),
            ));
        }
        if !(t0.is_finite() && phi.is_finite() && omega.is_finite()) {
            return Err(Error::InvalidArgument("window bounds must be finite".into()));
        }
        if ((k as f64 * delta) - phi).abs() > 1e-9 * phi {
            return Err(Error::InvalidArgument(format!(
                "k * delta = {} does not match phi = {phi}",
                k as f64 * delta
            )));
        }
        Ok(WindowConfig {
            t0,
            phi,
            omega,
            delta,
            k,
        })
    }

    /// Window from the snapshot spacing; `phi` is derived as `k * delta`.
    pub fn from_snapshots(t0: f64, delta: f64, k: usize, omega: f64) -> Result<Self> {
        Self::new(t0, k as f64 * delta, omega, delta, k)
    }

    pub fn feature_end(&self) -> f64 {
        self.t0 + self.phi
    }

    pub fn t1(&self) -> f64 {
        self.feature_end() + self.omega
    }

    pub fn plan(&self) -> SnapshotPlan {
        SnapshotPlan {
            t0: self.t0,
            delta: self.delta,
            k: self.k,
        }
    }
}

/// Outcome of labeling one node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLabel {
    pub pair: (usize, usize),
    pub observed: bool,
    pub t: f64,
}

/// First time the target relation exists between each pair, looking only at
/// formations up to `horizon`.
///
/// The relation is present on each interval between consecutive birth/death
/// timestamps of the target's link types, so one evaluation per interval
/// suffices. The formation time is the left end of the first interval where
/// the pair has a path instance.
pub fn first_formation(
    evaluator: &PathEvaluator<'_>,
    target: &MetaPath,
    pairs: &[(usize, usize)],
    horizon: f64,
) -> Result<Vec<Option<f64>>> {
    let graph = evaluator.graph();
    let types: Vec<usize> = target.steps().iter().map(|s| s.link_type).collect();
    let mut marks: Vec<f64> = graph
        .links()
        .iter()
        .filter(|l| types.contains(&l.link_type))
        .flat_map(|l| std::iter::once(l.birth).chain(l.death))
        .collect();
    marks.sort_by(f64::total_cmp);
    marks.dedup();

    let local = PathEvaluator::with_options(graph, evaluator.multiplicity(), false);
    let mut out = vec![None; pairs.len()];
    let mut pending = pairs.len();
    for (j, &start) in marks.iter().enumerate() {
        if start > horizon || pending == 0 {
            break;
        }
        let probe = marks.get(j + 1).copied().unwrap_or(start + 1.0);
        let m = local.matrix(target, probe)?;
        if m.is_empty() {
            continue;
        }
        for (slot, &(a, b)) in out.iter_mut().zip(pairs) {
            if slot.is_none() && m.get(a, b) > 0 {
                *slot = Some(start);
                pending -= 1;
            }
        }
    }
    Ok(out)
}

/// Labels candidate pairs against the target relation. Pairs that formed the
/// relation at or before the end of the feature window are excluded.
pub fn label_pairs(
    evaluator: &PathEvaluator<'_>,
    target: &MetaPath,
    window: &WindowConfig,
    candidates: &[(usize, usize)],
) -> Result<Vec<PairLabel>> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate list".into()));
    }
    let formed = first_formation(evaluator, target, candidates, window.t1())?;
    let start = window.feature_end();
    Ok(candidates
        .iter()
        .zip(formed)
        .filter_map(|(&pair, tr)| match tr {
            Some(tr) if tr <= start => None,
            Some(tr) if tr <= window.t1() => Some(PairLabel {
                pair,
                observed: true,
                t: tr - start,
            }),
            _ => Some(PairLabel {
                pair,
                observed: false,
                t: window.omega,
            }),
        })
        .collect())
}

/// Pairs with at least one non-zero feature meta-path count at `tau`,
/// sorted. Self-pairs are skipped when both ends have the same type.
pub fn candidate_pairs(
    evaluator: &PathEvaluator<'_>,
    features: &[MetaPath],
    tau: f64,
) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for p in features {
        let same_type = p.source_type() == p.dest_type();
        let m = evaluator.matrix(p, tau)?;
        pairs.extend(
            m.iter()
                .filter(|&(a, b, _)| !(same_type && a == b))
                .map(|(a, b, _)| (a, b)),
        );
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

/// Keeps every observed label and a uniformly drawn subset of censored ones
/// so that censored samples make up `ratio` of the result (as far as the
/// censored pool allows). Input order is preserved.
pub fn subsample_censored(labels: &[PairLabel], ratio: f64, seed: u64) -> Result<Vec<PairLabel>> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidArgument(format!(
            "censored ratio {ratio} must lie in [0, 1)"
        )));
    }
    let observed = labels.iter().filter(|l| l.observed).count();
    let censored: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].observed).collect();
    let wanted = ((observed as f64) * ratio / (1.0 - ratio)).round() as usize;
    if wanted >= censored.len() {
        return Ok(labels.to_vec());
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; labels.len()];
    for &i in &censored {
        keep[i] = false;
    }
    for pick in rand::seq::index::sample(&mut rng, censored.len(), wanted) {
        keep[censored[pick]] = true;
    }
    Ok(labels
        .iter()
        .zip(keep)
        .filter_map(|(l, k)| k.then_some(*l))
        .collect())
}

/// Single-snapshot aggregation: the feature value at the end of the window
/// (baseline plus the summed differences).
pub fn aggregate_stack(series: &PairSeries) -> Vec<f64> {
    (0..series.dim())
        .map(|j| {
            let total: i64 = series.baseline[j] + series.series.iter().map(|r| r[j]).sum::<i64>();
            total as f64
        })
        .collect()
}

/// Exponentially smoothed series: `f1 = x1`, `fi = a*xi + (1-a)*f(i-1)`;
/// returns `fk`.
pub fn aggregate_expsmooth(series: &PairSeries, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "smoothing factor {alpha} must lie in (0, 1)"
        )));
    }
    let mut rows = series.series.iter();
    let Some(first) = rows.next() else {
        return Ok(vec![0.0; series.dim()]);
    };
    let mut f: Vec<f64> = first.iter().map(|&v| v as f64).collect();
    for row in rows {
        for (fj, &xj) in f.iter_mut().zip(row) {
            *fj = alpha * xj as f64 + (1.0 - alpha) * *fj;
        }
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn identity(dim: usize) -> Self {
        Standardization {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Column means and population standard deviations. Constant columns get
    /// a unit scale.
    pub fn fit(rows: &[Vec<f64>], dim: usize) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardization { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_identity(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0) && self.std.iter().all(|&s| s == 1.0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }

    /// Maps coefficients `(w, bias)` learned on standardized features back
    /// to the raw feature scale.
    pub fn unscale_coefficients(&self, w_with_bias: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out: Vec<f64> = (0..d).map(|j| w_with_bias[j] / self.std[j]).collect();
        let shift: f64 = (0..d).map(|j| out[j] * self.mean[j]).sum();
        out.push(w_with_bias[d] - shift);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub src: String,
    pub dst: String,
    pub x: Vec<f64>,
    pub observed: bool,
    pub t: f64,
}

fn sample_order(a: &LabeledSample, b: &LabeledSample) -> Ordering {
    a.t.total_cmp(&b.t)
        .then(b.observed.cmp(&a.observed))
        .then_with(|| a.src.cmp(&b.src))
        .then_with(|| a.dst.cmp(&b.dst))
}

/// Samples sorted ascending by time; at equal times observed samples come
/// before censored ones, then pairs are ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub dim: usize,
    /// Present when `x` holds standardized values.
    pub standardization: Option<Standardization>,
}

impl Dataset {
    pub fn new(mut samples: Vec<LabeledSample>, dim: usize) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "sample {i} has {} features, expected {dim}",
                    s.x.len()
                )));
            }
            if !(s.t > 0.0 && s.t.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} has non-positive or non-finite time {}",
                    s.t
                )));
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("sample {i} has non-finite features")));
            }
        }
        samples.sort_by(sample_order);
        Ok(Dataset {
            samples,
            dim,
            standardization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_observed(&self) -> usize {
        self.samples.iter().filter(|s| s.observed).count()
    }

    pub fn is_sorted(&self) -> bool {
        self.samples
            .windows(2)
            .all(|w| sample_order(&w[0], &w[1]) != Ordering::Greater)
    }

    /// Standardizes every column in place using this dataset's statistics.
    /// No-op when already standardized.
    pub fn standardize(&mut self) {
        if self.standardization.is_some() {
            return;
        }
        let rows: Vec<Vec<f64>> = self.samples.iter().map(|s| s.x.clone()).collect();
        let st = Standardization::fit(&rows, self.dim);
        for s in &mut self.samples {
            s.x = st.apply(&s.x);
        }
        self.standardization = Some(st);
    }

    /// Features of sample `i` on the original scale.
    pub fn raw_x(&self, i: usize) -> Vec<f64> {
        match &self.standardization {
            Some(st) => st.invert(&self.samples[i].x),
            None => self.samples[i].x.clone(),
        }
    }

    /// The scaling a model trained on this dataset must apply to raw inputs.
    pub fn scaling(&self) -> Standardization {
        self.standardization
            .clone()
            .unwrap_or_else(|| Standardization::identity(self.dim))
    }
}

/// Joins per-pair features with per-pair labels into a sorted dataset.
pub fn build_dataset(
    features: Vec<((String, String), Vec<f64>)>,
    labels: Vec<((String, String), bool, f64)>,
    standardize: bool,
) -> Result<Dataset> {
    let dim = features.first().map_or(0, |f| f.1.len());
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let mut by_pair: HashMap<(String, String), Vec<f64>> = HashMap::with_capacity(features.len());
    for (pair, x) in features {
        if x.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "pair {pair:?} has {} features, expected {dim}",
                x.len()
            )));
        }
        if by_pair.insert(pair.clone(), x).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate pair {pair:?}")));
        }
    }
    let mut samples = Vec::with_capacity(labels.len());
    for ((src, dst), observed, t) in labels {
        let x = by_pair.remove(&(src.clone(), dst.clone())).ok_or_else(|| {
            Error::DimensionMismatch(format!("label for ({src}, {dst}) has no feature row"))
        })?;
        samples.push(LabeledSample {
            src,
            dst,
            x,
            observed,
            t,
        });
    }
    if !samples.iter().any(|s| s.observed) {
        return Err(Error::NoObservedSamples);
    }
    let mut ds = Dataset::new(samples, dim)?;
    if standardize {
        ds.standardize();
    }
    Ok(ds)
}
