//! # hazardnet
//!
//! Predicts *when* a target relationship forms between two nodes of a dynamic
//! heterogeneous information network.
//!
//! The pipeline:
//!
//! 1. [`graph`] loads a typed, time-stamped network and materializes
//!    time-aware adjacency matrices as [`sparse::SparseCountMatrix`] values.
//! 2. [`metapath`] compiles meta-path expressions such as `write> cite> <write`
//!    into cached sparse products and emits per-pair snapshot time series.
//! 3. [`dataset`] splits the timeline into a feature window and an observation
//!    window, labels pairs as observed or censored and aggregates the series.
//! 4. [`npglm`] fits the non-parametric proportional-hazards model and answers
//!    ranged-probability, quantile and sampling queries. [`glm`] holds the
//!    parametric Exponential/Weibull baselines.
//! 5. [`metrics`] scores point predictions and rankings; [`synthetic`]
//!    generates censored data with known parameters.
//!
//! ```
//! use hazardnet::npglm::{fit, FitConfig};
//! use hazardnet::synthetic::{generate, Distribution, SynthConfig};
//!
//! let out = generate(&SynthConfig::new(Distribution::Rayleigh, 200, 50, 3, 7)).unwrap();
//! let fitted = fit(&out.dataset, &FitConfig::default()).unwrap();
//! let median = fitted.model.quantile(&out.dataset.samples[0].x, 0.5).unwrap();
//! assert!(median.time > 0.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod glm;
pub mod graph;
pub mod io;
pub mod metapath;
pub mod metrics;
pub mod npglm;
pub mod optim;
pub mod sparse;
pub mod synthetic;

pub use error::{Error, Result};
