//! Censored survival data with known generating parameters.
//!
//! Each sample draws `x ~ N(0, I)`, gets rate `alpha = exp(w.x + b)` and an
//! event time by inverse transform from one of the proportional-hazards
//! families below. The parameters `w ~ N(0, I)`, `b ~ N(0, 1)` are drawn
//! first from the same seeded stream.

use rand::distr::{Distribution as _, Open01};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Cumulative hazard `alpha t^2 / 2`.
    Rayleigh,
    /// Cumulative hazard `alpha (e^t - 1)`.
    Gompertz,
    /// Cumulative hazard `alpha t`.
    Exponential,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rayleigh" => Ok(Distribution::Rayleigh),
            "gompertz" => Ok(Distribution::Gompertz),
            "exponential" | "exp" => Ok(Distribution::Exponential),
            other => Err(Error::InvalidArgument(format!("unknown distribution {other:?}"))),
        }
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Distribution::Rayleigh => "rayleigh",
            Distribution::Gompertz => "gompertz",
            Distribution::Exponential => "exponential",
        })
    }
}

/// How the censored samples are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CensoringPolicy {
    /// Sort by drawn time and censor the `n_censored` largest, keeping their
    /// drawn times.
    #[default]
    Tail,
    /// Censor a uniformly random subset; each censored sample records a
    /// censoring time uniform on `(0, t)` below its drawn event time.
    Uniform,
}

impl std::str::FromStr for CensoringPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tail" => Ok(CensoringPolicy::Tail),
            "uniform" => Ok(CensoringPolicy::Uniform),
            other => Err(Error::InvalidArgument(format!("unknown censoring policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub dist: Distribution,
    pub n_observed: usize,
    pub n_censored: usize,
    pub dim: usize,
    pub seed: u64,
    pub censoring: CensoringPolicy,
}

impl SynthConfig {
    pub fn new(dist: Distribution, n_observed: usize, n_censored: usize, dim: usize, seed: u64) -> Self {
        SynthConfig {
            dist,
            n_observed,
            n_censored,
            dim,
            seed,
            censoring: CensoringPolicy::Tail,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_observed == 0 {
            return Err(Error::InvalidArgument("n_observed must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidArgument("dim must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub true_w: Vec<f64>,
    pub true_b: f64,
}

/// Inverse-transform event time for rate `alpha` and uniform `u`.
pub fn draw_time(dist: Distribution, alpha: f64, u: f64) -> f64 {
    match dist {
        Distribution::Rayleigh => (-2.0 * u.ln() / alpha).sqrt(),
        Distribution::Gompertz => (1.0 - u.ln() / alpha).ln(),
        Distribution::Exponential => -u.ln() / alpha,
    }
}

/// Survival function of the family at rate `alpha`.
pub fn survival(dist: Distribution, alpha: f64, t: f64) -> f64 {
    let cumulative = match dist {
        Distribution::Rayleigh => alpha * t * t / 2.0,
        Distribution::Gompertz => alpha * t.exp_m1(),
        Distribution::Exponential => alpha * t,
    };
    (-cumulative).exp()
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let w = normal_vec(&mut rng, config.dim);
    let b: f64 = rng.sample(StandardNormal);
    draw_samples(config, w, b, &mut rng)
}

/// Draws samples for fixed parameters, e.g. a test set sharing the
/// generating process of a training set.
pub fn generate_with_params(config: &SynthConfig, w: &[f64], b: f64) -> Result<SynthOutput> {
    config.validate()?;
    if w.len() != config.dim {
        return Err(Error::DimensionMismatch(format!(
            "weight vector has length {}, expected {}",
            w.len(),
            config.dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    draw_samples(config, w.to_vec(), b, &mut rng)
}

fn draw_samples(config: &SynthConfig, w: Vec<f64>, b: f64, rng: &mut ChaCha8Rng) -> Result<SynthOutput> {
    let n = config.n_observed + config.n_censored;
    let mut drawn: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|_| {
            let x = normal_vec(rng, config.dim);
            let eta: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + b;
            let u: f64 = Open01.sample(rng);
            let t = draw_time(config.dist, eta.exp(), u);
            (x, t)
        })
        .collect();
    drawn.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut censored = vec![false; n];
    match config.censoring {
        CensoringPolicy::Tail => censored[config.n_observed..].fill(true),
        CensoringPolicy::Uniform => {
            for i in index::sample(rng, n, config.n_censored) {
                censored[i] = true;
                let u: f64 = Open01.sample(rng);
                drawn[i].1 *= u;
            }
        }
    }
    let samples = drawn
        .into_iter()
        .zip(censored)
        .enumerate()
        .map(|(i, ((x, t), c))| LabeledSample {
            src: format!("s{i:07}"),
            dst: "synthetic".into(),
            x,
            observed: !c,
            t,
        })
        .collect();
    Ok(SynthOutput {
        dataset: Dataset::new(samples, config.dim)?,
        true_w: w,
        true_b: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_transform_identities() {
        let u = (-1.0f64).exp();
        assert!((draw_time(Distribution::Rayleigh, 2.0, u) - 1.0).abs() < 1e-15);
        assert!((draw_time(Distribution::Gompertz, 1.0, u) - 2f64.ln()).abs() < 1e-15);
        assert!((draw_time(Distribution::Exponential, 0.5, u) - 2.0).abs() < 1e-15);
        for dist in [Distribution::Rayleigh, Distribution::Gompertz, Distribution::Exponential] {
            let t = draw_time(dist, 1.7, 0.3);
            assert!((survival(dist, 1.7, t) - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn rayleigh_draws_match_survival() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let alpha = 1.3;
        let mut ts: Vec<f64> = (0..100_000)
            .map(|_| draw_time(Distribution::Rayleigh, alpha, Open01.sample(&mut rng)))
            .collect();
        ts.sort_by(f64::total_cmp);
        let n = ts.len() as f64;
        let mut ks = 0.0f64;
        for (i, &t) in ts.iter().enumerate() {
            let s = survival(Distribution::Rayleigh, alpha, t);
            let above = (n - i as f64 - 1.0) / n;
            let at_or_above = (n - i as f64) / n;
            ks = ks.max((s - above).abs()).max((s - at_or_above).abs());
        }
        assert!(ks < 0.01, "Kolmogorov distance {ks}");
    }

    #[test]
    fn tail_censoring_takes_largest_times() {
        let out = generate(&SynthConfig::new(Distribution::Gompertz, 30, 20, 3, 5)).unwrap();
        let ds = &out.dataset;
        assert_eq!(ds.len(), 50);
        assert_eq!(ds.n_observed(), 30);
        let max_obs = ds.samples.iter().filter(|s| s.observed).map(|s| s.t).fold(0.0, f64::max);
        assert!(ds.samples.iter().filter(|s| !s.observed).all(|s| s.t >= max_obs));
        assert!(ds.is_sorted());
    }

    #[test]
    fn reproducible() {
        let c = SynthConfig::new(Distribution::Rayleigh, 10, 10, 2, 9);
        assert_eq!(generate(&c).unwrap(), generate(&c).unwrap());
        let other = generate(&SynthConfig { seed: 10, ..c }).unwrap();
        assert_ne!(generate(&c).unwrap().true_w, other.true_w);
    }

    #[test]
    fn uniform_policy_censors_below_event() {
        let c = SynthConfig {
            censoring: CensoringPolicy::Uniform,
            ..SynthConfig::new(Distribution::Rayleigh, 40, 60, 2, 3)
        };
        let out = generate(&c).unwrap();
        assert_eq!(out.dataset.n_observed(), 40);
        assert_eq!(out.dataset.len(), 100);
    }

    #[test]
    fn invalid_configs() {
        assert!(generate(&SynthConfig::new(Distribution::Rayleigh, 0, 5, 2, 1)).is_err());
        assert!(generate(&SynthConfig::new(Distribution::Rayleigh, 5, 5, 0, 1)).is_err());
        let c = SynthConfig::new(Distribution::Rayleigh, 5, 0, 2, 1);
        assert!(generate_with_params(&c, &[1.0], 0.0).is_err());
    }
}
