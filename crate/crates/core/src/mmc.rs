//! Karp's maximum-mean-cycle solver and a description-length-aware
//! variant, both used as heuristics for the unconstrained search.
//!
//! Maximum mean on weights w is solved as Karp's minimum mean on -w. The
//! dynamic-programming table is built once on the sign-reversed graph and
//! shared by both selection rules.

use crate::graph::Cycle;
use crate::interestingness::{interestingness, ICDLParams, SurprisalGraph};

/// Minimum-weight edge-progression table on the sign-reversed graph.
///
/// Rows are progression lengths k = 0..=n, columns are nodes. Row 0 is
/// identically zero: a virtual super-source with zero-weight edges to
/// every node makes all nodes reachable without introducing cycles, and
/// collapsing its free hop leaves `d(0, v) = 0` for every v.
#[derive(Debug, Clone)]
pub struct KarpTable {
    n: usize,
    d: Vec<f64>,
    pred: Vec<Option<u32>>,
}

impl KarpTable {
    /// Minimum weight over length-k progressions ending at `v` (negated
    /// weights); infinite when no such progression exists.
    pub fn d(&self, k: usize, v: usize) -> f64 {
        self.d[k * self.n + v]
    }

    /// Predecessor of `v` on the minimum length-k progression.
    pub fn pred(&self, k: usize, v: usize) -> Option<usize> {
        self.pred[k * self.n + v].map(|u| u as usize)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Simple cycles occurring on the minimum progression of length
    /// `level` ending at `v`, deduplicated by canonical form. Segments
    /// between repeats that are themselves non-simple are skipped.
    fn cycles_on_walk(&self, level: usize, v: usize) -> Vec<Cycle> {
        let mut cycles = Vec::new();
        if !self.d(level, v).is_finite() {
            return cycles;
        }
        let mut seen_at: Vec<Option<usize>> = vec![None; self.n];
        // walk[i] is the node at progression position level - i.
        let mut walk: Vec<usize> = Vec::with_capacity(level + 1);
        let mut cur = v;
        let mut k = level;
        loop {
            if let Some(pos) = seen_at[cur] {
                // walk[pos..] reversed is a rotation of the closed segment.
                let mut fwd: Vec<usize> = walk[pos..].to_vec();
                fwd.reverse();
                let mut sorted = fwd.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() == fwd.len() {
                    cycles.push(Cycle::new(fwd).canonical());
                }
            }
            seen_at[cur] = Some(walk.len());
            walk.push(cur);
            if k == 0 {
                break;
            }
            match self.pred(k, cur) {
                Some(u) => {
                    cur = u;
                    k -= 1;
                }
                None => break,
            }
        }
        cycles.sort_by(|a, b| a.nodes().cmp(b.nodes()));
        cycles.dedup();
        cycles
    }
}

/// Builds the progression table for `sg` on negated weights in O(n m).
pub fn build_karp_table(sg: &SurprisalGraph) -> KarpTable {
    let g = sg.graph();
    let n = g.node_count();
    let mut d = vec![f64::INFINITY; (n + 1) * n];
    let mut pred: Vec<Option<u32>> = vec![None; (n + 1) * n];
    for v in 0..n {
        d[v] = 0.0;
    }
    for k in 1..=n {
        let (lo, hi) = d.split_at_mut(k * n);
        let prev = &lo[(k - 1) * n..];
        let row = &mut hi[..n];
        let prow = &mut pred[k * n..(k + 1) * n];
        for e in g.edges() {
            let cand = prev[e.src] - e.weight;
            if cand < row[e.dst] {
                row[e.dst] = cand;
                prow[e.dst] = Some(e.src as u32);
            }
        }
    }
    KarpTable { n, d, pred }
}

/// Outcome of the classic selection rule: the maximum mean over all
/// simple cycles and one cycle attaining it.
#[derive(Debug, Clone)]
pub struct MeanCycle {
    pub mean: f64,
    pub cycle: Cycle,
}

/// Characterization minimum on the sign-reversed graph: for each node v
/// with a finite length-n progression, the inner maximum of
/// (d(n, v) - d(k, v)) / (n - k); the outer minimum over v is the minimum
/// cycle mean. Ties pick the smallest v and smallest k.
fn select_rho(table: &KarpTable, denominator: impl Fn(usize) -> f64) -> Option<(usize, f64)> {
    let n = table.order();
    let mut best: Option<(usize, f64)> = None;
    for v in 0..n {
        let dn = table.d(n, v);
        if !dn.is_finite() {
            continue;
        }
        let mut inner: Option<f64> = None;
        for k in 0..n {
            let dk = table.d(k, v);
            if !dk.is_finite() {
                continue;
            }
            let ratio = (dn - dk) / denominator(n - k);
            if inner.is_none_or(|cur| ratio > cur) {
                inner = Some(ratio);
            }
        }
        let inner = inner.expect("row 0 is always finite");
        if best.is_none_or(|(_, cur)| inner < cur) {
            best = Some((v, inner));
        }
    }
    best
}

/// Maximum-mean simple cycle; `None` when the graph is acyclic. The
/// returned cycle's mean equals `mean` within 1e-9.
pub fn karp_mmc(sg: &SurprisalGraph) -> Option<MeanCycle> {
    let table = build_karp_table(sg);
    karp_mmc_with_table(sg, &table)
}

pub fn karp_mmc_with_table(sg: &SurprisalGraph, table: &KarpTable) -> Option<MeanCycle> {
    let (v, rho) = select_rho(table, |len| len as f64)?;
    let mean = -rho;
    let cycle = extract_cycle(table, v);
    let cycle_mean = |c: &Cycle| c.weight_in(sg.graph()).expect("cycle valid") / c.len() as f64;
    if (cycle_mean(&cycle) - mean).abs() <= 1e-9 {
        return Some(MeanCycle { mean, cycle });
    }
    // Rare tie artifact: the first cycle closed on the walk may miss the
    // optimum. Scan every level of v's progressions and keep the best
    // verified cycle.
    let mut fallback: Option<(f64, Cycle)> = None;
    for level in (1..=table.order()).rev() {
        for c in table.cycles_on_walk(level, v) {
            let m = cycle_mean(&c);
            if fallback.as_ref().is_none_or(|(best, _)| m > *best) {
                fallback = Some((m, c));
            }
        }
    }
    let (m, cycle) = fallback.expect("a finite length-n progression contains a cycle");
    Some(MeanCycle { mean: m, cycle })
}

/// Result of the variant rule: the cycle extracted for the node selected
/// by the description-length-aware ratio, its selection ratio, and its
/// true objective value.
#[derive(Debug, Clone)]
pub struct VariantCycle {
    pub cycle: Cycle,
    /// Ratio minimized during selection; mimics F of a cycle of length
    /// n - k, which the extracted cycle's length need not match.
    pub selection_ratio: f64,
    pub f: f64,
}

/// Karp variant: selects the node minimizing
/// (d(n, v) - d(k, v)) / (alpha (n - k) + n beta) on the sign-reversed
/// graph and extracts a cycle from its progression. The cycle is scored by
/// its true F; `None` when the graph is acyclic.
pub fn karp_variant(sg: &SurprisalGraph, p: &ICDLParams) -> Option<VariantCycle> {
    let table = build_karp_table(sg);
    karp_variant_with_table(sg, &table, p)
}

pub fn karp_variant_with_table(
    sg: &SurprisalGraph,
    table: &KarpTable,
    p: &ICDLParams,
) -> Option<VariantCycle> {
    let n_orig = p.n as f64;
    let (v, ratio) = select_rho(table, |len| p.alpha * len as f64 + n_orig * p.beta)?;
    let cycle = extract_cycle(table, v);
    let f = interestingness(&cycle, sg, p).expect("extracted cycle valid");
    Some(VariantCycle { cycle, selection_ratio: -ratio, f })
}

/// Walks predecessors from the length-n progression ending at `v`; the
/// first node repetition encountered delimits a simple cycle, returned in
/// forward order.
///
/// Panics if `d(n, v)` is infinite (no length-n progression exists).
pub fn extract_cycle(table: &KarpTable, v: usize) -> Cycle {
    let n = table.order();
    assert!(
        table.d(n, v).is_finite(),
        "no length-{n} progression ends at node {v}"
    );
    let mut seen_at: Vec<Option<usize>> = vec![None; n];
    let mut walk: Vec<usize> = Vec::with_capacity(n + 1);
    let mut cur = v;
    let mut k = n;
    loop {
        if let Some(pos) = seen_at[cur] {
            let mut nodes: Vec<usize> = walk[pos..].to_vec();
            nodes.reverse();
            return Cycle::new(nodes);
        }
        seen_at[cur] = Some(walk.len());
        walk.push(cur);
        assert!(k > 0, "length-{n} progression on {n} nodes must repeat a node");
        cur = table
            .pred(k, cur)
            .expect("finite table entries have predecessors");
        k -= 1;
    }
}
