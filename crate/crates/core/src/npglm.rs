//! Non-parametric proportional-hazards GLM.
//!
//! The conditional intensity factorizes as `g(w.x) h(t)` with
//! `g = exp` and `h` piecewise constant between consecutive training
//! times. Fitting alternates two exact half-steps on the negative
//! log-likelihood:
//!
//! * with `w` fixed, the cumulative hazard has the closed form
//!   `H(t_i) = sum_{j<=i} y_j / sum_{k>=j} g(w.x_k)` ([`compute_hazard`]);
//! * with `H` fixed, the loss in `w`, `sum_i g(w.x_i) H(t_i) - y_i w.x_i`,
//!   is convex and is minimized by damped Newton ([`optimize_w`]).
//!
//! Neither half-step can increase the loss, so the trace recorded by
//! [`fit`] is non-increasing.
//!
//! The coefficient vector carries a trailing bias acting on a constant
//! feature. The bias and the scale of `H` trade off exactly (only
//! `g(w.x) H(t)` is identified); predictions are unaffected.

use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Standardization};
use crate::error::{Error, Result};
use crate::optim::{self, Minimum, NewtonConfig, Objective};

/// Linear predictors are clamped to this magnitude before exponentiation.
pub const LINK_CLAMP: f64 = 50.0;

pub fn link_g(z: f64) -> f64 {
    z.clamp(-LINK_CLAMP, LINK_CLAMP).exp()
}

/// `w[..d] . x + w[d]`.
pub fn linear_predictor(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    debug_assert_eq!(w.len(), d + 1);
    w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]
}

/// Spreads tied times so the sequence is strictly increasing: the `r`-th
/// repeat of a time is moved up by `r * eps`, `eps = 1e-9 * max(t)`.
pub fn resolve_ties(times: &[f64]) -> Vec<f64> {
    let eps = 1e-9 * times.iter().fold(0.0f64, |m, &t| m.max(t.abs())).max(f64::MIN_POSITIVE);
    let mut out: Vec<f64> = Vec::with_capacity(times.len());
    for &t in times {
        let next = match out.last() {
            Some(&prev) if t <= prev => prev + eps,
            _ => t,
        };
        out.push(next);
    }
    out
}

/// Dense design matrix with the constant column appended.
struct Design {
    n: usize,
    p: usize,
    rows: Vec<f64>,
    observed: Vec<bool>,
    times: Vec<f64>,
}

impl Design {
    fn new(ds: &Dataset) -> Result<Self> {
        if !ds.is_sorted() {
            return Err(Error::InvalidArgument("dataset must be sorted by time".into()));
        }
        let p = ds.dim + 1;
        let mut rows = Vec::with_capacity(ds.len() * p);
        for s in &ds.samples {
            rows.extend_from_slice(&s.x);
            rows.push(1.0);
        }
        let raw: Vec<f64> = ds.samples.iter().map(|s| s.t).collect();
        Ok(Design {
            n: ds.len(),
            p,
            rows,
            observed: ds.samples.iter().map(|s| s.observed).collect(),
            times: resolve_ties(&raw),
        })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    fn etas(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn check_w(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vector has length {}, expected {}",
                w.len(),
                self.p
            )));
        }
        Ok(())
    }
}

fn hazard_from_etas(etas: &[f64], observed: &[bool]) -> Result<Vec<f64>> {
    if !observed.iter().any(|&y| y) {
        return Err(Error::NoObservedSamples);
    }
    let n = etas.len();
    let mut risk = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += link_g(etas[i]);
        risk[i] = acc;
    }
    let mut hazard = Vec::with_capacity(n);
    let mut h = 0.0;
    for i in 0..n {
        if observed[i] {
            h += 1.0 / risk[i];
        }
        hazard.push(h);
    }
    Ok(hazard)
}

/// Cumulative hazard at every training time for coefficients `w` (length
/// `dim + 1`). One backward pass for the risk-set sums, one forward prefix
/// sum.
pub fn compute_hazard(w: &[f64], dataset: &Dataset) -> Result<Vec<f64>> {
    let design = Design::new(dataset)?;
    design.check_w(w)?;
    hazard_from_etas(&design.etas(w), &design.observed)
}

fn loss_parts(etas: &[f64], hazard: &[f64], observed: &[bool], times: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    let (mut prev_h, mut prev_t) = (0.0, 0.0);
    for i in 0..etas.len() {
        let eta = etas[i].clamp(-LINK_CLAMP, LINK_CLAMP);
        total += eta.exp() * hazard[i];
        if observed[i] {
            let inc = hazard[i] - prev_h;
            if !(inc > 0.0) {
                return Err(Error::ZeroHazardIncrement { index: i });
            }
            total -= eta + inc.ln() - (times[i] - prev_t).ln();
        }
        prev_h = hazard[i];
        prev_t = times[i];
    }
    Ok(total)
}

/// Negative log-likelihood of `(w, H)` with the hazard rate between
/// training times recovered from the increments of `H`.
pub fn loss(w: &[f64], hazard: &[f64], dataset: &Dataset) -> Result<f64> {
    let design = Design::new(dataset)?;
    design.check_w(w)?;
    if hazard.len() != design.n {
        return Err(Error::DimensionMismatch("hazard length differs from dataset".into()));
    }
    loss_parts(&design.etas(w), hazard, &design.observed, &design.times)
}

/// The convex loss in `w` for a fixed cumulative hazard.
struct CoefficientLoss<'a> {
    design: &'a Design,
    hazard: &'a [f64],
}

impl Objective for CoefficientLoss<'_> {
    fn dim(&self) -> usize {
        self.design.p
    }

    fn value(&self, w: &[f64]) -> f64 {
        let d = self.design;
        (0..d.n)
            .map(|i| {
                let eta: f64 = d.row(i).iter().zip(w).map(|(a, b)| a * b).sum();
                let mut v = link_g(eta) * self.hazard[i];
                if d.observed[i] {
                    v -= eta;
                }
                v
            })
            .sum()
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let d = self.design;
        let mut g = vec![0.0; d.p];
        for i in 0..d.n {
            let row = d.row(i);
            let eta: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
            let r = link_g(eta) * self.hazard[i] - if d.observed[i] { 1.0 } else { 0.0 };
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += xj * r;
            }
        }
        g
    }

    fn hessian(&self, w: &[f64]) -> Vec<f64> {
        let d = self.design;
        let p = d.p;
        let mut h = vec![0.0; p * p];
        for i in 0..d.n {
            let row = d.row(i);
            let eta: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
            let c = link_g(eta) * self.hazard[i];
            if c == 0.0 {
                continue;
            }
            for a in 0..p {
                let ca = c * row[a];
                for b in 0..=a {
                    h[a * p + b] += ca * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[b * p + a] = h[a * p + b];
            }
        }
        h
    }
}

/// Value and gradient of the loss in `w` at a fixed hazard; exposed for
/// derivative checks.
pub fn coefficient_loss(w: &[f64], hazard: &[f64], dataset: &Dataset) -> Result<(f64, Vec<f64>)> {
    let design = Design::new(dataset)?;
    design.check_w(w)?;
    let obj = CoefficientLoss { design: &design, hazard };
    Ok((obj.value(w), obj.gradient(w)))
}

/// Minimizes the loss in `w` with the hazard held fixed, starting at
/// `w_init`.
pub fn optimize_w(
    dataset: &Dataset,
    hazard: &[f64],
    w_init: &[f64],
    config: &NewtonConfig,
) -> Result<Minimum> {
    let design = Design::new(dataset)?;
    design.check_w(w_init)?;
    optimize_on(&design, hazard, w_init, config)
}

fn optimize_on(design: &Design, hazard: &[f64], w_init: &[f64], config: &NewtonConfig) -> Result<Minimum> {
    let obj = CoefficientLoss { design, hazard };
    optim::minimize(&obj, w_init, config)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Stop when the loss changes by less than this between iterations.
    pub threshold: f64,
    pub max_iter: usize,
    pub inner: NewtonConfig,
    /// Seed of the standard-normal initial coefficients.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            threshold: 1e-4,
            max_iter: 500,
            inner: NewtonConfig {
                max_steps: 50,
                grad_tol: 1e-8,
            },
            seed: 0,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || self.max_iter == 0 || self.inner.max_steps == 0 {
            return Err(Error::InvalidArgument(
                "threshold must be positive and iteration limits at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpGlmModel {
    /// Feature coefficients followed by the bias.
    pub w: Vec<f64>,
    pub event_times: Vec<f64>,
    #[serde(rename = "H")]
    pub hazard: Vec<f64>,
    pub standardization: Standardization,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: NpGlmModel,
    pub iterations: usize,
    /// False when `max_iter` was reached before the threshold triggered.
    pub converged: bool,
    /// Largest increase of the loss between consecutive iterations (zero
    /// when the trace is non-increasing).
    pub max_loss_increase: f64,
}

impl FitOutcome {
    /// Per-iteration mean log-likelihood, `-loss / N`.
    pub fn average_log_likelihood(&self) -> Vec<f64> {
        let n = self.model.event_times.len() as f64;
        self.model.loss_trace.iter().map(|l| -l / n).collect()
    }
}

/// Alternating fit from seeded standard-normal coefficients.
pub fn fit(dataset: &Dataset, config: &FitConfig) -> Result<FitOutcome> {
    config.validate()?;
    let design = Design::new(dataset)?;
    if !design.observed.iter().any(|&y| y) {
        return Err(Error::NoObservedSamples);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let mut w: Vec<f64> = (0..design.p)
        .map(|_| rng.sample(rand_distr::StandardNormal))
        .collect();

    let mut trace: Vec<f64> = Vec::new();
    let mut hazard = Vec::new();
    let mut converged = false;
    let mut max_increase = 0.0f64;
    for _ in 0..config.max_iter {
        hazard = hazard_from_etas(&design.etas(&w), &design.observed)?;
        w = optimize_on(&design, &hazard, &w, &config.inner)?.x;
        let l = loss_parts(&design.etas(&w), &hazard, &design.observed, &design.times)?;
        if !l.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        if let Some(&prev) = trace.last() {
            max_increase = max_increase.max(l - prev);
            if (l - prev).abs() < config.threshold {
                trace.push(l);
                converged = true;
                break;
            }
        }
        trace.push(l);
    }
    let iterations = trace.len();
    Ok(FitOutcome {
        model: NpGlmModel {
            w,
            event_times: design.times,
            hazard,
            standardization: dataset.scaling(),
            unit: String::new(),
            loss_trace: trace,
        },
        iterations,
        converged,
        max_loss_increase: max_increase,
    })
}

/// A value that may lie beyond the last training time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonValue {
    pub value: f64,
    pub beyond_horizon: bool,
}

/// A time estimate; when `horizon_exceeded` is set, `time` is the last
/// training time and only a lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeEstimate {
    pub time: f64,
    pub horizon_exceeded: bool,
}

impl NpGlmModel {
    pub fn dim(&self) -> usize {
        self.w.len() - 1
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "feature vector has length {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Coefficients mapped back to raw feature units.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        self.standardization.unscale_coefficients(&self.w)
    }

    /// `w.x` for a raw (unstandardized) feature vector.
    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        Ok(linear_predictor(&self.w, &self.standardization.apply(x)))
    }

    pub fn risk(&self, x: &[f64]) -> Result<f64> {
        Ok(link_g(self.linear_predictor(x)?))
    }

    /// Cumulative hazard at `t`, linear between training times, through the
    /// origin before the first one and constant after the last one.
    pub fn interpolate_hazard(&self, t: f64) -> Result<HorizonValue> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time {t} is negative")));
        }
        let times = &self.event_times;
        let n = times.len();
        let k = times.partition_point(|&ti| ti <= t);
        let (value, beyond) = if k == 0 {
            (self.hazard[0] * t / times[0], false)
        } else if k == n {
            (self.hazard[n - 1], t > times[n - 1])
        } else {
            let (t0, t1) = (times[k - 1], times[k]);
            let (h0, h1) = (self.hazard[k - 1], self.hazard[k]);
            (h0 + (t - t0) * (h1 - h0) / (t1 - t0), false)
        };
        Ok(HorizonValue {
            value,
            beyond_horizon: beyond,
        })
    }

    pub fn survival(&self, x: &[f64], t: f64) -> Result<f64> {
        Ok((-self.risk(x)? * self.interpolate_hazard(t)?.value).exp())
    }

    /// Probability that the relation forms within `[t_a, t_b]`.
    pub fn ranged_probability(&self, x: &[f64], t_a: f64, t_b: f64) -> Result<f64> {
        if t_a > t_b {
            return Err(Error::InvalidArgument(format!("t_a = {t_a} exceeds t_b = {t_b}")));
        }
        let g = self.risk(x)?;
        let ha = self.interpolate_hazard(t_a)?.value;
        let hb = self.interpolate_hazard(t_b)?.value;
        Ok(((-g * ha).exp() - (-g * hb).exp()).clamp(0.0, 1.0))
    }

    /// Time by which the relation forms with probability `alpha`.
    pub fn quantile(&self, x: &[f64], alpha: f64) -> Result<TimeEstimate> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {alpha} must lie in (0, 1)")));
        }
        let target = -(1.0 - alpha).ln() / self.risk(x)?;
        Ok(self.invert_hazard(target))
    }

    pub fn median(&self, x: &[f64]) -> Result<TimeEstimate> {
        self.quantile(x, 0.5)
    }

    fn invert_hazard(&self, target: f64) -> TimeEstimate {
        let times = &self.event_times;
        let n = times.len();
        let k = self.hazard.partition_point(|&h| h < target);
        if k == n {
            return TimeEstimate {
                time: times[n - 1],
                horizon_exceeded: true,
            };
        }
        let (t0, h0) = if k == 0 { (0.0, 0.0) } else { (times[k - 1], self.hazard[k - 1]) };
        let (t1, h1) = (times[k], self.hazard[k]);
        TimeEstimate {
            time: t0 + (t1 - t0) * (target - h0) / (h1 - h0),
            horizon_exceeded: false,
        }
    }

    /// Inverse-transform draw: the first training time whose survival falls
    /// to `u ~ Uniform(0, 1)`.
    pub fn sample_time<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<TimeEstimate> {
        let g = self.risk(x)?;
        let u: f64 = Open01.sample(rng);
        Ok(self.sample_with_uniform(g, u))
    }

    fn sample_with_uniform(&self, g: f64, u: f64) -> TimeEstimate {
        // S(t_k) <= u  <=>  H(t_k) >= -ln(u) / g
        let target = -u.ln() / g;
        let n = self.event_times.len();
        let k = self.hazard.partition_point(|&h| h < target);
        TimeEstimate {
            time: self.event_times[k.min(n - 1)],
            horizon_exceeded: k == n,
        }
    }
}
