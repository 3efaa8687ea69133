//! Directed-graph data model, validation, edge-list I/O and the unweighted
//! BFS primitive used by pruning and the DFS guide.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: usize, weight: f64 },
    #[error("duplicate edge ({src}, {dst})")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("node id {id} out of range (n = {n})")]
    NodeOutOfRange { id: usize, n: usize },
    #[error("edge ({src}, {dst}) has non-finite or negative weight {weight}")]
    BadWeight { src: usize, dst: usize, weight: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A directed edge with a non-negative real weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Simple digraph with non-negative edge weights. Immutable once built:
/// all solvers share references concurrently.
#[derive(Debug, Clone)]
pub struct DiGraph {
    n: usize,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    index: HashMap<(usize, usize), usize>,
}

impl DiGraph {
    pub fn new(n: usize) -> Self {
        DiGraph {
            n,
            edges: Vec::new(),
            out: vec![Vec::new(); n],
            inc: vec![Vec::new(); n],
            index: HashMap::new(),
        }
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut g = DiGraph::new(n);
        for (src, dst, weight) in edges {
            g.add_edge(src, dst, weight)?;
        }
        Ok(g)
    }

    /// Inserts one edge. Rejects parallel edges, out-of-range endpoints
    /// and negative or non-finite weights. Self-loops are allowed.
    pub fn add_edge(&mut self, src: usize, dst: usize, weight: f64) -> Result<(), GraphError> {
        if src >= self.n {
            return Err(GraphError::NodeOutOfRange { id: src, n: self.n });
        }
        if dst >= self.n {
            return Err(GraphError::NodeOutOfRange { id: dst, n: self.n });
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(GraphError::BadWeight { src, dst, weight });
        }
        if self.index.contains_key(&(src, dst)) {
            return Err(GraphError::DuplicateEdge { src, dst });
        }
        let id = self.edges.len();
        self.edges.push(Edge { src, dst, weight });
        self.out[src].push(id);
        self.inc[dst].push(id);
        self.index.insert((src, dst), id);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.index.contains_key(&(src, dst))
    }

    pub fn edge_id(&self, src: usize, dst: usize) -> Option<usize> {
        self.index.get(&(src, dst)).copied()
    }

    pub fn weight(&self, src: usize, dst: usize) -> Option<f64> {
        self.edge_id(src, dst).map(|id| self.edges[id].weight)
    }

    pub(crate) fn set_edge_weight(&mut self, id: usize, weight: f64) {
        debug_assert!(weight.is_finite() && weight >= 0.0);
        self.edges[id].weight = weight;
    }

    /// Out-neighbors of `v` as (neighbor, edge id).
    pub fn out_neighbors(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out[v].iter().map(move |&id| (self.edges[id].dst, id))
    }

    /// In-neighbors of `v` as (neighbor, edge id).
    pub fn in_neighbors(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.inc[v].iter().map(move |&id| (self.edges[id].src, id))
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out[v].len()
    }

    /// Weighted out-degree (row sum of the adjacency matrix).
    pub fn out_strength(&self, v: usize) -> f64 {
        self.out[v].iter().map(|&id| self.edges[id].weight).sum()
    }

    /// Weighted in-degree (column sum of the adjacency matrix).
    pub fn in_strength(&self, v: usize) -> f64 {
        self.inc[v].iter().map(|&id| self.edges[id].weight).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Same topology with every edge reversed.
    pub fn transpose(&self) -> DiGraph {
        let mut g = DiGraph::new(self.n);
        for e in &self.edges {
            g.add_edge(e.dst, e.src, e.weight).expect("transpose of a valid graph");
        }
        g
    }

    /// Hop distances from `source` (or towards it when `reversed`),
    /// `None` where unreachable.
    pub fn bfs_hops(&self, source: usize, reversed: bool) -> Vec<Option<usize>> {
        assert!(source < self.n, "bfs source {source} out of range");
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::new();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            let ids = if reversed { &self.inc[u] } else { &self.out[u] };
            for &id in ids {
                let v = if reversed { self.edges[id].src } else { self.edges[id].dst };
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// True iff `nodes` is a simple directed cycle of this graph: all nodes
    /// distinct and in range, every consecutive edge present, closing edge
    /// included. A single node requires a self-loop.
    pub fn validate_cycle(&self, nodes: &[usize]) -> bool {
        if nodes.is_empty() || nodes.len() > self.n {
            return false;
        }
        let mut seen = vec![false; self.n];
        for &v in nodes {
            if v >= self.n || seen[v] {
                return false;
            }
            seen[v] = true;
        }
        for i in 0..nodes.len() {
            let u = nodes[i];
            let v = nodes[(i + 1) % nodes.len()];
            if !self.has_edge(u, v) {
                return false;
            }
        }
        true
    }
}

/// A simple directed cycle, stored as its node sequence; the closing edge
/// from the last node back to the first is implied.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cycle {
    nodes: Vec<usize>,
}

impl Cycle {
    /// `nodes` must be non-empty; validity against a host graph is the
    /// caller's job (see [`DiGraph::validate_cycle`]).
    pub fn new(nodes: Vec<usize>) -> Self {
        assert!(!nodes.is_empty(), "a cycle has at least one node");
        Cycle { nodes }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Number of edges, equal to the number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, v: usize) -> bool {
        self.nodes.contains(&v)
    }

    /// Edges of the cycle including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.nodes.len();
        (0..k).map(move |i| (self.nodes[i], self.nodes[(i + 1) % k]))
    }

    /// Rotation starting at the smallest node id; the canonical form used
    /// for deduplication and tie-breaking.
    pub fn canonical(&self) -> Cycle {
        let pos = self
            .nodes
            .iter()
            .enumerate()
            .min_by_key(|&(_, v)| v)
            .map(|(i, _)| i)
            .unwrap();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        nodes.extend_from_slice(&self.nodes[pos..]);
        nodes.extend_from_slice(&self.nodes[..pos]);
        Cycle { nodes }
    }

    /// Sum of host-graph weights over the cycle's edges; `None` if some
    /// edge is missing from `g`.
    pub fn weight_in(&self, g: &DiGraph) -> Option<f64> {
        let mut total = 0.0;
        for (u, v) in self.edges() {
            total += g.weight(u, v)?;
        }
        Some(total)
    }
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.nodes.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", ids.join(" -> "))
    }
}

/// How node ids in an edge list are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdMode {
    /// Tokens are parsed as integers; `n` is one past the largest id.
    Numeric,
    /// Tokens are arbitrary strings, numbered by first appearance.
    ByAppearance,
}

/// A graph loaded from disk together with the labels recovered for its
/// nodes (present when ids were assigned by appearance).
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: DiGraph,
    pub labels: Option<Vec<String>>,
}

/// Reads a whitespace-separated edge list: `src dst weight` per line,
/// `#` starts a comment, blank lines are skipped.
pub fn load_edge_list(path: impl AsRef<Path>, mode: IdMode) -> Result<LoadedGraph, GraphError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows: Vec<(usize, usize, f64, usize)> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut name_ids: HashMap<String, usize> = HashMap::new();
    let mut max_id = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let text = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 3 {
            return Err(GraphError::Parse {
                line: lineno,
                msg: format!("expected `src dst weight`, got {} fields", fields.len()),
            });
        }
        let mut node_id = |tok: &str| -> Result<usize, GraphError> {
            match mode {
                IdMode::Numeric => tok.parse::<usize>().map_err(|e| GraphError::Parse {
                    line: lineno,
                    msg: format!("bad node id {tok:?}: {e}"),
                }),
                IdMode::ByAppearance => Ok(*name_ids.entry(tok.to_string()).or_insert_with(|| {
                    names.push(tok.to_string());
                    names.len() - 1
                })),
            }
        };
        let src = node_id(fields[0])?;
        let dst = node_id(fields[1])?;
        let weight: f64 = fields[2].parse().map_err(|e| GraphError::Parse {
            line: lineno,
            msg: format!("bad weight {:?}: {e}", fields[2]),
        })?;
        if weight < 0.0 {
            return Err(GraphError::NegativeWeight { line: lineno, weight });
        }
        if !weight.is_finite() {
            return Err(GraphError::Parse {
                line: lineno,
                msg: format!("non-finite weight {weight}"),
            });
        }
        max_id = max_id.max(src).max(dst);
        rows.push((src, dst, weight, lineno));
    }

    let n = match mode {
        IdMode::Numeric => {
            if rows.is_empty() {
                0
            } else {
                max_id + 1
            }
        }
        IdMode::ByAppearance => names.len(),
    };
    let mut graph = DiGraph::new(n);
    for (src, dst, weight, _lineno) in &rows {
        graph.add_edge(*src, *dst, *weight)?;
    }
    Ok(LoadedGraph {
        graph,
        labels: match mode {
            IdMode::Numeric => None,
            IdMode::ByAppearance => Some(names),
        },
    })
}

/// Writes the edge list in the same format `load_edge_list` reads.
pub fn write_edge_list(graph: &DiGraph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let mut file = std::fs::File::create(path)?;
    for e in graph.edges() {
        writeln!(file, "{}\t{}\t{}", e.src, e.dst, e.weight)?;
    }
    Ok(())
}

/// Reads an `id<TAB>label` sidecar file into a label table of size `n`.
/// Missing ids keep their numeric string.
pub fn load_labels(path: impl AsRef<Path>, n: usize) -> Result<Vec<String>, GraphError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut labels: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let text = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        if text.trim().is_empty() {
            continue;
        }
        let mut parts = text.splitn(2, ['\t', ' ']);
        let id: usize = parts
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|e| GraphError::Parse {
                line: lineno,
                msg: format!("bad node id: {e}"),
            })?;
        let label = parts
            .next()
            .ok_or_else(|| GraphError::Parse {
                line: lineno,
                msg: "expected `id<TAB>label`".to_string(),
            })?
            .trim();
        if id >= n {
            return Err(GraphError::NodeOutOfRange { id, n });
        }
        labels[id] = label.to_string();
    }
    Ok(labels)
}
