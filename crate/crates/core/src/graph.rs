//! Dynamic heterogeneous information networks.
//!
//! A [`TemporalGraph`] holds typed nodes and typed links stamped with a birth
//! time and an optional death time. The node universe is fixed at load time,
//! so every time-aware adjacency matrix of a link type has the same shape no
//! matter which timestamp it is taken at.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseCountMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkTypeDef {
    pub name: String,
    pub src: String,
    pub dst: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub node_types: Vec<String>,
    pub link_types: Vec<LinkTypeDef>,
}

impl Schema {
    pub fn new(node_types: Vec<String>, link_types: Vec<LinkTypeDef>) -> Result<Self> {
        let schema = Schema {
            node_types,
            link_types,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        for (i, t) in self.node_types.iter().enumerate() {
            if self.node_types[..i].contains(t) {
                return Err(Error::Schema(format!("duplicate node type `{t}`")));
            }
        }
        for (i, lt) in self.link_types.iter().enumerate() {
            if self.link_types[..i].iter().any(|o| o.name == lt.name) {
                return Err(Error::Schema(format!("duplicate link type `{}`", lt.name)));
            }
            for end in [&lt.src, &lt.dst] {
                if !self.node_types.contains(end) {
                    return Err(Error::Schema(format!(
                        "link type `{}` references undeclared node type `{end}`",
                        lt.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn node_type_index(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t == name)
    }

    pub fn link_type_index(&self, name: &str) -> Option<usize> {
        self.link_types.iter().position(|t| t.name == name)
    }

    /// `(source node type, destination node type)` indices of a link type.
    pub fn endpoints(&self, link_type: usize) -> (usize, usize) {
        let lt = &self.link_types[link_type];
        (
            self.node_type_index(&lt.src).expect("validated schema"),
            self.node_type_index(&lt.dst).expect("validated schema"),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub link_type: usize,
    pub src: usize,
    pub dst: usize,
    pub birth: f64,
    /// `None` means the link is never removed.
    pub death: Option<f64>,
}

impl Link {
    /// Alive at `tau` iff `birth < tau <= death`.
    pub fn alive_at(&self, tau: f64) -> bool {
        self.birth < tau && self.death.is_none_or(|d| tau <= d)
    }
}

#[derive(Debug, Clone, Default)]
struct NodeIndex {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl NodeIndex {
    fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.lookup.get(id) {
            return i;
        }
        let i = self.names.len();
        self.names.push(id.to_string());
        self.lookup.insert(id.to_string(), i);
        i
    }
}

#[derive(Debug, Clone)]
pub struct TemporalGraph {
    schema: Schema,
    nodes: Vec<NodeIndex>,
    links: Vec<Link>,
}

impl TemporalGraph {
    pub fn new(schema: Schema) -> Self {
        let nodes = vec![NodeIndex::default(); schema.node_types.len()];
        TemporalGraph {
            schema,
            nodes,
            links: Vec::new(),
        }
    }

    /// Adds a link, interning both endpoint ids into their node types.
    pub fn add_link(
        &mut self,
        link_type: &str,
        src: &str,
        dst: &str,
        birth: f64,
        death: Option<f64>,
    ) -> Result<()> {
        let lt = self
            .schema
            .link_type_index(link_type)
            .ok_or_else(|| Error::UnknownLinkType(link_type.to_string()))?;
        if !birth.is_finite() || death.is_some_and(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument("timestamps must be finite".into()));
        }
        if let Some(d) = death {
            if d <= birth {
                return Err(Error::InvalidArgument(format!(
                    "death {d} is not after birth {birth}"
                )));
            }
        }
        let (st, dt) = self.schema.endpoints(lt);
        let src = self.nodes[st].intern(src);
        let dst = self.nodes[dt].intern(dst);
        self.links.push(Link {
            link_type: lt,
            src,
            dst,
            birth,
            death,
        });
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node_count(&self, node_type: usize) -> usize {
        self.nodes[node_type].names.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.iter().map(|n| n.names.len()).sum()
    }

    pub fn node_name(&self, node_type: usize, index: usize) -> &str {
        &self.nodes[node_type].names[index]
    }

    pub fn node_id(&self, node_type: usize, name: &str) -> Option<usize> {
        self.nodes[node_type].lookup.get(name).copied()
    }

    /// Latest birth or death timestamp in the graph.
    pub fn latest_timestamp(&self) -> Option<f64> {
        self.links
            .iter()
            .flat_map(|l| std::iter::once(l.birth).chain(l.death))
            .reduce(f64::max)
    }

    /// Time-aware adjacency matrix of `link_type` at `tau`: entry `(a, b)`
    /// counts the parallel links `a -> b` alive at `tau`.
    pub fn time_aware_adjacency(&self, link_type: usize, tau: f64) -> Result<SparseCountMatrix> {
        if link_type >= self.schema.link_types.len() {
            return Err(Error::UnknownLinkType(format!("#{link_type}")));
        }
        let (st, dt) = self.schema.endpoints(link_type);
        SparseCountMatrix::from_triplets(
            self.node_count(st),
            self.node_count(dt),
            self.links
                .iter()
                .filter(|l| l.link_type == link_type && l.alive_at(tau))
                .map(|l| (l.src, l.dst, 1)),
        )
    }

    pub fn time_aware_adjacency_by_name(&self, link_type: &str, tau: f64) -> Result<SparseCountMatrix> {
        let lt = self
            .schema
            .link_type_index(link_type)
            .ok_or_else(|| Error::UnknownLinkType(link_type.to_string()))?;
        self.time_aware_adjacency(lt, tau)
    }
}

fn parse_time(field: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::EdgeRecord {
        line,
        msg: format!("malformed {what} timestamp `{field}`"),
    })?;
    if !v.is_finite() {
        return Err(Error::EdgeRecord {
            line,
            msg: format!("non-finite {what} timestamp"),
        });
    }
    Ok(v)
}

/// Loads a graph from a JSON schema document and a TSV edge stream
/// (`link_type, src, dst, birth, death`; `death` may be empty; `#` lines are
/// comments).
pub fn load_graph(schema_text: &str, edges: impl BufRead) -> Result<TemporalGraph> {
    let schema = Schema::from_json(schema_text)?;
    let mut graph = TemporalGraph::new(schema);
    for (i, line) in edges.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() < 4 || fields.len() > 5 {
            return Err(Error::EdgeRecord {
                line: lineno,
                msg: format!("expected 4 or 5 tab-separated fields, got {}", fields.len()),
            });
        }
        let birth = parse_time(fields[3], lineno, "birth")?;
        let death = match fields.get(4).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => Some(parse_time(s, lineno, "death")?),
        };
        graph
            .add_link(fields[0].trim(), fields[1].trim(), fields[2].trim(), birth, death)
            .map_err(|e| match e {
                Error::UnknownLinkType(_) => e,
                other => Error::EdgeRecord {
                    line: lineno,
                    msg: other.to_string(),
                },
            })?;
    }
    Ok(graph)
}
