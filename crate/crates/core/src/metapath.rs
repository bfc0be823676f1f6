//! Meta-paths and the time-aware features built from them.
//!
//! Expressions are whitespace-separated steps; `name>` follows a link type
//! forward (source to destination), `<name` follows it backward. The
//! co-authorship path `A -write-> P <-write- A` is written `write> <write`.
//!
//! A [`PathEvaluator`] turns a meta-path into the product of time-aware
//! adjacency matrices. Every prefix product is memoized per timestamp, and a
//! prefix that reads the same forwards and backwards (with directions
//! flipped) is evaluated as `X * X^T` from its first half.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Schema, TemporalGraph};
use crate::sparse::SparseCountMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Step {
    pub link_type: usize,
    pub direction: Direction,
}

impl Step {
    fn mirrored(self) -> Self {
        Step {
            link_type: self.link_type,
            direction: self.direction.flipped(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetaPath {
    steps: Vec<Step>,
    source_type: usize,
    dest_type: usize,
}

impl MetaPath {
    /// Builds a path from steps, type-checking consecutive steps.
    pub fn new(steps: Vec<Step>, schema: &Schema) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::MetaPathSyntax("empty meta-path".into()));
        }
        let ends = |s: &Step| -> Result<(usize, usize)> {
            if s.link_type >= schema.link_types.len() {
                return Err(Error::UnknownLinkType(format!("#{}", s.link_type)));
            }
            let (a, b) = schema.endpoints(s.link_type);
            Ok(match s.direction {
                Direction::Forward => (a, b),
                Direction::Backward => (b, a),
            })
        };
        let (source_type, mut at) = ends(&steps[0])?;
        for (i, s) in steps.iter().enumerate().skip(1) {
            let (from, to) = ends(s)?;
            if from != at {
                return Err(Error::MetaPathType(format!(
                    "step {} (`{}`) starts at {} but the path is at {}",
                    i + 1,
                    schema.link_types[s.link_type].name,
                    schema.node_types[from],
                    schema.node_types[at]
                )));
            }
            at = to;
        }
        Ok(MetaPath {
            steps,
            source_type,
            dest_type: at,
        })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn source_type(&self) -> usize {
        self.source_type
    }

    pub fn dest_type(&self) -> usize {
        self.dest_type
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// True when the second half mirrors the first, so the path matrix is
    /// `X * X^T` for `X` the first-half product.
    pub fn is_palindromic(&self) -> bool {
        is_palindromic(&self.steps)
    }

    /// Renders the path back into expression syntax.
    pub fn to_expr(&self, schema: &Schema) -> String {
        self.steps
            .iter()
            .map(|s| {
                let name = &schema.link_types[s.link_type].name;
                match s.direction {
                    Direction::Forward => format!("{name}>"),
                    Direction::Backward => format!("<{name}"),
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Node-type chain such as `A->P->P<-A`.
    pub fn type_chain(&self, schema: &Schema) -> String {
        let mut out = schema.node_types[self.source_type].clone();
        for s in &self.steps {
            let (a, b) = schema.endpoints(s.link_type);
            let (arrow, to) = match s.direction {
                Direction::Forward => ("->", b),
                Direction::Backward => ("<-", a),
            };
            out.push_str(arrow);
            out.push_str(&schema.node_types[to]);
        }
        out
    }
}

fn is_palindromic(steps: &[Step]) -> bool {
    let n = steps.len();
    n.is_multiple_of(2) && (0..n / 2).all(|i| steps[n - 1 - i] == steps[i].mirrored())
}

pub fn parse_metapath(expr: &str, schema: &Schema) -> Result<MetaPath> {
    let mut steps = Vec::new();
    for token in expr.split_whitespace() {
        let (name, direction) = if let Some(name) = token.strip_suffix('>') {
            (name, Direction::Forward)
        } else if let Some(name) = token.strip_prefix('<') {
            (name, Direction::Backward)
        } else {
            return Err(Error::MetaPathSyntax(format!(
                "step `{token}` must look like `name>` or `<name`"
            )));
        };
        if name.is_empty() || name.contains(['<', '>']) {
            return Err(Error::MetaPathSyntax(format!("bad step `{token}`")));
        }
        let link_type = schema
            .link_type_index(name)
            .ok_or_else(|| Error::MetaPathType(format!("unknown link type `{name}`")))?;
        steps.push(Step {
            link_type,
            direction,
        });
    }
    MetaPath::new(steps, schema)
}

/// Contents of a meta-path list file.
#[derive(Debug, Clone)]
pub struct MetaPathFile {
    pub target: Option<MetaPath>,
    pub features: Vec<MetaPath>,
}

/// Parses a meta-path list: one expression per line, `#` comments, and an
/// optional leading `target: <expr>` line.
pub fn parse_metapath_file(text: &str, schema: &Schema) -> Result<MetaPathFile> {
    let mut target = None;
    let mut features = Vec::new();
    let mut seen_content = false;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("target:") {
            if seen_content {
                return Err(Error::MetaPathSyntax(
                    "`target:` must be the first entry of the file".into(),
                ));
            }
            target = Some(parse_metapath(rest.trim(), schema)?);
        } else {
            features.push(parse_metapath(line, schema)?);
        }
        seen_content = true;
    }
    Ok(MetaPathFile { target, features })
}

/// How link multiplicity enters the adjacency matrices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Multiplicity {
    /// Parallel links add up.
    #[default]
    Count,
    /// Any number of parallel links counts as one.
    Binary,
}

type CacheKey = (Vec<Step>, u64);
type Slot = Arc<OnceLock<Result<Arc<SparseCountMatrix>>>>;

/// Evaluates meta-path matrices over one graph, memoizing every prefix
/// product per timestamp. Safe to share across threads; each key is
/// computed once and then shared.
pub struct PathEvaluator<'g> {
    graph: &'g TemporalGraph,
    multiplicity: Multiplicity,
    cache: Option<Mutex<HashMap<CacheKey, Slot>>>,
}

impl<'g> PathEvaluator<'g> {
    pub fn new(graph: &'g TemporalGraph) -> Self {
        Self::with_options(graph, Multiplicity::Count, true)
    }

    pub fn with_options(graph: &'g TemporalGraph, multiplicity: Multiplicity, cached: bool) -> Self {
        PathEvaluator {
            graph,
            multiplicity,
            cache: cached.then(|| Mutex::new(HashMap::new())),
        }
    }

    pub fn graph(&self) -> &'g TemporalGraph {
        self.graph
    }

    pub fn multiplicity(&self) -> Multiplicity {
        self.multiplicity
    }

    pub fn cached_entries(&self) -> usize {
        self.cache
            .as_ref()
            .map_or(0, |c| c.lock().expect("cache lock").len())
    }

    pub fn clear_cache(&self) {
        if let Some(c) = &self.cache {
            c.lock().expect("cache lock").clear();
        }
    }

    pub fn step_matrix(&self, step: Step, tau: f64) -> Result<SparseCountMatrix> {
        let m = self.graph.time_aware_adjacency(step.link_type, tau)?;
        let m = match step.direction {
            Direction::Forward => m,
            Direction::Backward => m.transpose(),
        };
        Ok(match self.multiplicity {
            Multiplicity::Count => m,
            Multiplicity::Binary => m.binarized(),
        })
    }

    /// Path-instance count matrix of `path` at `tau`.
    pub fn matrix(&self, path: &MetaPath, tau: f64) -> Result<Arc<SparseCountMatrix>> {
        self.prefix(path.steps(), tau)
    }

    /// Plain left-to-right product without memoization or the symmetry
    /// shortcut.
    pub fn direct_product(&self, path: &MetaPath, tau: f64) -> Result<SparseCountMatrix> {
        let mut acc = self.step_matrix(path.steps()[0], tau)?;
        for &s in &path.steps()[1..] {
            acc = acc.spmm(&self.step_matrix(s, tau)?)?;
        }
        Ok(acc)
    }

    fn prefix(&self, steps: &[Step], tau: f64) -> Result<Arc<SparseCountMatrix>> {
        let Some(cache) = &self.cache else {
            return self.compute_prefix(steps, tau).map(Arc::new);
        };
        let slot = {
            let mut map = cache.lock().expect("cache lock");
            map.entry((steps.to_vec(), tau.to_bits()))
                .or_insert_with(|| Arc::new(OnceLock::new()))
                .clone()
        };
        slot.get_or_init(|| self.compute_prefix(steps, tau).map(Arc::new))
            .clone()
    }

    fn compute_prefix(&self, steps: &[Step], tau: f64) -> Result<SparseCountMatrix> {
        match steps.len() {
            0 => Err(Error::MetaPathSyntax("empty meta-path".into())),
            1 => self.step_matrix(steps[0], tau),
            n if is_palindromic(steps) => {
                let half = self.prefix(&steps[..n / 2], tau)?;
                half.spmm(&half.transpose())
            }
            n => {
                let head = self.prefix(&steps[..n - 1], tau)?;
                head.spmm(&self.step_matrix(steps[n - 1], tau)?)
            }
        }
    }

    /// Time-aware meta-path feature of one pair: path instances at `tau`.
    pub fn feature(&self, path: &MetaPath, tau: f64, src: usize, dst: usize) -> Result<u64> {
        Ok(self.matrix(path, tau)?.get(src, dst))
    }
}

/// Snapshot grid of the feature window: boundaries `t0 + i * delta` for
/// `i = 0..=k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotPlan {
    pub t0: f64,
    pub delta: f64,
    pub k: usize,
}

impl SnapshotPlan {
    pub fn new(t0: f64, delta: f64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("snapshot count must be >= 1".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) || !t0.is_finite() {
            return Err(Error::InvalidArgument("delta must be positive and finite".into()));
        }
        Ok(SnapshotPlan { t0, delta, k })
    }

    pub fn phi(&self) -> f64 {
        self.k as f64 * self.delta
    }

    pub fn boundary(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.delta
    }
}

/// Multivariate snapshot series of one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSeries {
    pub pair: (usize, usize),
    /// Feature value of each path at `t0`.
    pub baseline: Vec<i64>,
    /// `k` rows of `d` differences; row `i` holds `f(t0+(i+1)Δ) - f(t0+iΔ)`.
    pub series: Vec<Vec<i64>>,
}

impl PairSeries {
    pub fn snapshots(&self) -> usize {
        self.series.len()
    }

    pub fn dim(&self) -> usize {
        self.baseline.len()
    }
}

fn to_signed(v: u64) -> Result<i64> {
    i64::try_from(v).map_err(|_| Error::Overflow)
}

/// Dynamic meta-path time series for every requested pair. Paths are
/// evaluated in parallel; the result does not depend on the thread count.
pub fn dynamic_series(
    evaluator: &PathEvaluator<'_>,
    paths: &[MetaPath],
    plan: &SnapshotPlan,
    pairs: &[(usize, usize)],
) -> Result<Vec<PairSeries>> {
    let Some(first) = paths.first() else {
        return Err(Error::InvalidArgument("no feature meta-paths".into()));
    };
    let schema = evaluator.graph().schema();
    for p in paths {
        if p.source_type() != first.source_type() || p.dest_type() != first.dest_type() {
            return Err(Error::MetaPathType(format!(
                "meta-path {} does not connect the same node types as {}",
                p.type_chain(schema),
                first.type_chain(schema)
            )));
        }
    }

    // values[j][p][i] = f at boundary i of path j for pair p
    let values: Vec<Vec<Vec<i64>>> = paths
        .par_iter()
        .map(|path| {
            let mut per_pair = vec![Vec::with_capacity(plan.k + 1); pairs.len()];
            for i in 0..=plan.k {
                let m = evaluator.matrix(path, plan.boundary(i))?;
                for (slot, &(a, b)) in per_pair.iter_mut().zip(pairs) {
                    slot.push(to_signed(m.get(a, b))?);
                }
            }
            Ok(per_pair)
        })
        .collect::<Result<_>>()?;

    Ok(pairs
        .iter()
        .enumerate()
        .map(|(p, &pair)| PairSeries {
            pair,
            baseline: values.iter().map(|v| v[p][0]).collect(),
            series: (1..=plan.k)
                .map(|i| values.iter().map(|v| v[p][i] - v[p][i - 1]).collect())
                .collect(),
        })
        .collect())
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Forward => write!(f, "forward"),
            Direction::Backward => write!(f, "backward"),
        }
    }
}
