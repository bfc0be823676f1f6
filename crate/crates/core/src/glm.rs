//! Parametric proportional-hazards baselines.
//!
//! Both families share the cumulative intensity `exp(w.x) t^alpha`:
//! Exponential fixes `alpha = 1`, Weibull optimizes `s = ln alpha` jointly
//! with `w`. Fitting minimizes the censored negative log-likelihood
//!
//! ```text
//! sum_i exp(w.x_i) t_i^alpha - y_i (w.x_i + ln alpha + (alpha - 1) ln t_i)
//! ```
//!
//! by damped Newton on `theta = (w, s)`.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Standardization};
use crate::error::{Error, Result};
use crate::npglm::linear_predictor;
use crate::optim::{self, NewtonConfig, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Exponential,
    Weibull,
}

impl Family {
    fn free_shape(self) -> bool {
        matches!(self, Family::Weibull)
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" | "expglm" => Ok(Family::Exponential),
            "weibull" | "wbl" | "wblglm" => Ok(Family::Weibull),
            other => Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricGlmModel {
    pub family: Family,
    /// Feature coefficients followed by the bias.
    pub w: Vec<f64>,
    pub shape: f64,
    pub standardization: Standardization,
    #[serde(default)]
    pub unit: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmConfig {
    pub newton: NewtonConfig,
}

impl Default for GlmConfig {
    fn default() -> Self {
        GlmConfig {
            newton: NewtonConfig {
                max_steps: 200,
                grad_tol: 1e-8,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricFit {
    pub model: ParametricGlmModel,
    pub log_likelihood: f64,
    pub converged: bool,
}

struct NegLogLik<'a> {
    family: Family,
    dim: usize,
    x: Vec<&'a [f64]>,
    y: Vec<bool>,
    log_t: Vec<f64>,
}

impl<'a> NegLogLik<'a> {
    fn new(dataset: &'a Dataset, family: Family) -> Result<Self> {
        if let Some(i) = dataset.samples.iter().position(|s| !(s.t > 0.0)) {
            return Err(Error::InvalidArgument(format!("sample {i} has non-positive time")));
        }
        Ok(NegLogLik {
            family,
            dim: dataset.dim,
            x: dataset.samples.iter().map(|s| s.x.as_slice()).collect(),
            y: dataset.samples.iter().map(|s| s.observed).collect(),
            log_t: dataset.samples.iter().map(|s| s.t.ln()).collect(),
        })
    }

    fn n_params(&self) -> usize {
        self.dim + 1 + usize::from(self.family.free_shape())
    }

    fn log_shape(&self, theta: &[f64]) -> f64 {
        if self.family.free_shape() {
            theta[self.dim + 1]
        } else {
            0.0
        }
    }

    /// `(eta_i, A_i = exp(eta_i) t_i^alpha)` per sample.
    fn terms(&self, theta: &[f64]) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let w = theta[..=self.dim].to_vec();
        let alpha = self.log_shape(theta).exp();
        (0..self.x.len()).map(move |i| {
            let eta = linear_predictor(&w, self.x[i]);
            (i, eta, (eta + alpha * self.log_t[i]).exp())
        })
    }
}

impl Objective for NegLogLik<'_> {
    fn dim(&self) -> usize {
        self.n_params()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let s = self.log_shape(theta);
        let alpha = s.exp();
        self.terms(theta)
            .map(|(i, eta, a)| {
                if self.y[i] {
                    a - (eta + s + (alpha - 1.0) * self.log_t[i])
                } else {
                    a
                }
            })
            .sum()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.dim + 1;
        let alpha = self.log_shape(theta).exp();
        let mut g = vec![0.0; self.n_params()];
        for (i, _, a) in self.terms(theta) {
            let y = if self.y[i] { 1.0 } else { 0.0 };
            let r = a - y;
            for (gj, xj) in g.iter_mut().zip(self.x[i]) {
                *gj += xj * r;
            }
            g[self.dim] += r;
            if self.family.free_shape() {
                let al = alpha * self.log_t[i];
                g[p] += a * al - y * (1.0 + al);
            }
        }
        g
    }

    fn hessian(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.n_params();
        let p = self.dim + 1;
        let alpha = self.log_shape(theta).exp();
        let mut h = vec![0.0; n * n];
        let mut row = vec![0.0; p];
        for (i, _, a) in self.terms(theta) {
            row[..self.dim].copy_from_slice(self.x[i]);
            row[self.dim] = 1.0;
            for r in 0..p {
                for c in 0..=r {
                    h[r * n + c] += a * row[r] * row[c];
                }
            }
            if self.family.free_shape() {
                let y = if self.y[i] { 1.0 } else { 0.0 };
                let al = alpha * self.log_t[i];
                for c in 0..p {
                    h[p * n + c] += a * al * row[c];
                }
                h[p * n + p] += al * (a * al + a - y);
            }
        }
        for r in 0..n {
            for c in 0..r {
                h[c * n + r] = h[r * n + c];
            }
        }
        h
    }
}

/// Negative log-likelihood and its gradient at `theta = (w, bias[, ln alpha])`.
pub fn negative_log_likelihood(dataset: &Dataset, family: Family, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let obj = NegLogLik::new(dataset, family)?;
    if theta.len() != obj.n_params() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has length {}, expected {}",
            theta.len(),
            obj.n_params()
        )));
    }
    Ok((obj.value(theta), obj.gradient(theta)))
}

/// Maximum-likelihood fit started from the constant-rate solution.
pub fn fit_parametric(dataset: &Dataset, family: Family, config: &GlmConfig) -> Result<ParametricFit> {
    let obj = NegLogLik::new(dataset, family)?;
    let events = dataset.n_observed();
    if events == 0 {
        return Err(Error::NoObservedSamples);
    }
    let exposure: f64 = dataset.samples.iter().map(|s| s.t).sum();
    let mut theta = vec![0.0; obj.n_params()];
    theta[dataset.dim] = (events as f64 / exposure).ln();
    let m = optim::minimize(&obj, &theta, &config.newton)?;
    let shape = obj.log_shape(&m.x).exp();
    Ok(ParametricFit {
        model: ParametricGlmModel {
            family,
            w: m.x[..=dataset.dim].to_vec(),
            shape,
            standardization: dataset.scaling(),
            unit: String::new(),
        },
        log_likelihood: -m.value,
        converged: m.converged,
    })
}

impl ParametricGlmModel {
    pub fn dim(&self) -> usize {
        self.w.len() - 1
    }

    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "feature vector has length {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(linear_predictor(&self.w, &self.standardization.apply(x)))
    }

    /// Coefficients mapped back to raw feature units.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        self.standardization.unscale_coefficients(&self.w)
    }

    pub fn survival(&self, x: &[f64], t: f64) -> Result<f64> {
        Ok((-self.linear_predictor(x)?.exp() * t.powf(self.shape)).exp())
    }

    /// Solves `S(t | x) = 1/2`.
    pub fn predict_median(&self, x: &[f64]) -> Result<f64> {
        Ok(median_time(self.linear_predictor(x)?, self.shape))
    }

    pub fn quantile(&self, x: &[f64], alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {alpha} must lie in (0, 1)")));
        }
        let eta = self.linear_predictor(x)?;
        Ok((-(1.0 - alpha).ln() / eta.exp()).powf(1.0 / self.shape))
    }

    pub fn ranged_probability(&self, x: &[f64], t_a: f64, t_b: f64) -> Result<f64> {
        if !(0.0 <= t_a && t_a <= t_b) {
            return Err(Error::InvalidArgument(format!("need 0 <= t_a <= t_b, got {t_a}, {t_b}")));
        }
        Ok(self.survival(x, t_a)? - self.survival(x, t_b)?)
    }
}

pub fn median_time(eta: f64, shape: f64) -> f64 {
    (std::f64::consts::LN_2 / eta.exp()).powf(1.0 / shape)
}
