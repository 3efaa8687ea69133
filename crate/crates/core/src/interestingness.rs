//! The interestingness ratio F(C) = IC(C) / DL(C) and its parameters.
//!
//! Logs are taken base 2 throughout, so surprisal weights, alpha and beta
//! are all in bits. F itself is invariant to the base because IC and DL
//! scale identically.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Cycle, DiGraph};

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("q = {0} outside (0, 1/2)")]
    QOutOfRange(f64),
    #[error("graph order must be at least 1")]
    EmptyGraph,
}

/// Parameters of the description length DL(C) = alpha * |C| + n * beta.
///
/// `n` is always the order of the original input graph, even when a solver
/// runs on a pruned subgraph, so that scores stay comparable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ICDLParams {
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
}

impl ICDLParams {
    /// alpha = log2((1-q)/q), beta = log2(1/(1-q)), for 0 < q < 1/2.
    pub fn from_q(q: f64, n: usize) -> Result<Self, ParamError> {
        if !(q > 0.0 && q < 0.5) {
            return Err(ParamError::QOutOfRange(q));
        }
        if n == 0 {
            return Err(ParamError::EmptyGraph);
        }
        Ok(ICDLParams {
            q,
            alpha: ((1.0 - q) / q).log2(),
            beta: (1.0 / (1.0 - q)).log2(),
            n,
        })
    }
}

/// A graph whose edge weights are surprisal values w(e) >= 0, i.e. the
/// per-edge information content -log2 Pr(mu(e) >= l_e).
#[derive(Debug, Clone)]
pub struct SurprisalGraph {
    graph: DiGraph,
}

impl SurprisalGraph {
    /// `graph`'s weights are taken as surprisals; they must already be
    /// non-negative, which `DiGraph` guarantees.
    pub fn new(graph: DiGraph) -> Self {
        SurprisalGraph { graph }
    }

    pub fn graph(&self) -> &DiGraph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Surprisal of the edge (u, v); `None` if the edge does not exist.
    pub fn w(&self, u: usize, v: usize) -> Option<f64> {
        self.graph.weight(u, v)
    }

    /// Sets the surprisal of every edge of `cycle` to zero, as when the
    /// cycle has been shown to the user and now conveys no information.
    pub fn zero_cycle(&mut self, cycle: &Cycle) {
        let ids: Vec<usize> = cycle
            .edges()
            .filter_map(|(u, v)| self.graph.edge_id(u, v))
            .collect();
        for id in ids {
            self.graph.set_edge_weight(id, 0.0);
        }
    }
}

/// Information content of a cycle: the sum of its surprisal weights.
/// `None` if the cycle is not valid in `sg`.
pub fn ic(cycle: &Cycle, sg: &SurprisalGraph) -> Option<f64> {
    cycle.weight_in(sg.graph())
}

/// Description length of communicating a cycle with `length` edges.
pub fn dl(length: usize, p: &ICDLParams) -> f64 {
    p.alpha * length as f64 + p.n as f64 * p.beta
}

/// F from already-computed parts. A zero-length "empty" pattern scores 0.
pub fn score(ic: f64, length: usize, p: &ICDLParams) -> f64 {
    if length == 0 {
        return 0.0;
    }
    ic / dl(length, p)
}

/// F(C) = IC(C) / DL(C). `None` if the cycle is not valid in `sg`.
pub fn interestingness(cycle: &Cycle, sg: &SurprisalGraph, p: &ICDLParams) -> Option<f64> {
    ic(cycle, sg).map(|ic| score(ic, cycle.len(), p))
}
