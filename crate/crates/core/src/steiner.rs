//! Local search for the terminal-constrained problem: prune the graph by
//! hop distances, find an initial Steiner cycle with a guided randomized
//! DFS, then greedily apply the best of four change moves.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Cycle, DiGraph};
use crate::interestingness::{ic, score, ICDLParams, SurprisalGraph};

/// Absolute improvement threshold of the greedy phase; guards against
/// float noise keeping the loop alive.
const EPS_IMPROVE: f64 = 1e-12;

/// Node-expansion budget of one randomized DFS, per restart, as a
/// multiple of the pruned graph's order.
const DFS_BUDGET_FACTOR: usize = 50;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("terminal set must not be empty")]
    NoTerminals,
    #[error("l_max {l_max} smaller than terminal count {k}")]
    LmaxTooSmall { l_max: usize, k: usize },
    #[error("restarts must be at least 1")]
    NoRestarts,
}

/// A terminal-constrained search: find a simple cycle through every
/// terminal with at most `l_max` edges.
#[derive(Debug, Clone)]
pub struct SteinerQuery {
    terminals: Vec<usize>,
    pub l_max: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl SteinerQuery {
    pub fn new(
        mut terminals: Vec<usize>,
        l_max: usize,
        restarts: usize,
        seed: u64,
    ) -> Result<Self, QueryError> {
        terminals.sort_unstable();
        terminals.dedup();
        if terminals.is_empty() {
            return Err(QueryError::NoTerminals);
        }
        if l_max < terminals.len().max(1) {
            return Err(QueryError::LmaxTooSmall { l_max, k: terminals.len() });
        }
        if restarts == 0 {
            return Err(QueryError::NoRestarts);
        }
        Ok(SteinerQuery { terminals, l_max, restarts, seed })
    }

    /// Sorted, deduplicated terminal ids.
    pub fn terminals(&self) -> &[usize] {
        &self.terminals
    }
}

/// Induced subgraph of the nodes that can lie on a qualifying cycle,
/// with the id maps between original and pruned coordinates.
#[derive(Debug, Clone)]
pub struct Pruned {
    pub graph: DiGraph,
    /// Pruned id -> original id, ascending.
    pub kept: Vec<usize>,
    /// Original id -> pruned id.
    pub index_of: Vec<Option<usize>>,
    /// Terminals in pruned coordinates, sorted.
    pub terminals: Vec<usize>,
}

/// Keeps exactly the nodes v with hops(q -> v) + hops(v -> q) <= l_max for
/// every terminal q. Any node of a qualifying Steiner cycle satisfies this
/// (both path segments run along the cycle), so pruning is lossless.
/// Returns `None` when some terminal itself fails the test, in which case
/// no qualifying cycle exists at all.
pub fn prune(graph: &DiGraph, query: &SteinerQuery) -> Option<Pruned> {
    let n = graph.node_count();
    for &t in query.terminals() {
        assert!(t < n, "terminal {t} out of range (n = {n})");
    }
    let mut keep = vec![true; n];
    for &q in query.terminals() {
        let fwd = graph.bfs_hops(q, false);
        let rev = graph.bfs_hops(q, true);
        for v in 0..n {
            keep[v] &= match (fwd[v], rev[v]) {
                (Some(a), Some(b)) => a + b <= query.l_max,
                _ => false,
            };
        }
    }
    if query.terminals().iter().any(|&t| !keep[t]) {
        return None;
    }
    let kept: Vec<usize> = (0..n).filter(|&v| keep[v]).collect();
    let mut index_of = vec![None; n];
    for (new, &old) in kept.iter().enumerate() {
        index_of[old] = Some(new);
    }
    let mut sub = DiGraph::new(kept.len());
    for e in graph.edges() {
        if let (Some(s), Some(d)) = (index_of[e.src], index_of[e.dst]) {
            sub.add_edge(s, d, e.weight).expect("induced subgraph of a valid graph");
        }
    }
    let terminals = query.terminals().iter().map(|&t| index_of[t].unwrap()).collect();
    Some(Pruned { graph: sub, kept, index_of, terminals })
}

/// Randomized depth-first search for an initial Steiner cycle on the
/// pruned graph. The search starts from the smallest terminal; at every
/// expansion the next node is drawn from the current frontier with
/// probability proportional to 1 / sum of hop distances towards the
/// terminals, so nodes near all terminals are explored first. Hop lower
/// bounds prune branches that cannot close within `l_max`. Returns a
/// cycle in pruned coordinates, or `None` once the expansion budget is
/// spent.
pub fn initial_cycle(pruned: &Pruned, l_max: usize, rng: &mut ChaCha8Rng) -> Option<Cycle> {
    let g = &pruned.graph;
    let n = g.node_count();
    if n == 0 {
        return None;
    }
    let terminals = &pruned.terminals;
    let start = terminals[0];
    // to_t[ti][v] = hops from v to terminal ti; finite for every kept node.
    let to_t: Vec<Vec<usize>> = terminals
        .iter()
        .map(|&t| {
            g.bfs_hops(t, true)
                .into_iter()
                .map(|d| d.expect("pruned nodes reach every terminal"))
                .collect()
        })
        .collect();
    let to_start = &to_t[0];
    // Guidance weight: total hop distance towards all terminals.
    let dist_sum: Vec<usize> = (0..n)
        .map(|v| (0..terminals.len()).map(|ti| to_t[ti][v]).sum())
        .collect();

    let mut on_path = vec![false; n];
    let mut is_terminal = vec![false; n];
    for &t in terminals {
        is_terminal[t] = true;
    }

    struct Frame {
        node: usize,
        candidates: Vec<usize>,
    }

    let budget = DFS_BUDGET_FACTOR * n;
    let mut expansions = 0usize;
    let mut path = vec![start];
    let mut missing = terminals.len() - 1;
    on_path[start] = true;

    // Lower bound on the edges still needed after stepping onto v: reach
    // every terminal not yet on the path, then return to the start.
    let bound_after = |v: usize, on_path: &[bool]| -> usize {
        let mut worst = to_start[v];
        for (ti, &t) in terminals.iter().enumerate() {
            if on_path[t] || t == v {
                continue;
            }
            worst = worst.max(to_t[ti][v] + to_start[t]);
        }
        worst
    };

    let candidates_of = |u: usize, edges_used: usize, on_path: &[bool]| -> Vec<usize> {
        let mut cands = Vec::new();
        for (v, _) in g.out_neighbors(u) {
            if on_path[v] {
                continue;
            }
            if edges_used + 1 + bound_after(v, on_path) > l_max {
                continue;
            }
            cands.push(v);
        }
        cands
    };

    // Closing test on arrival at the path's last node.
    let closes = |path: &[usize], missing: usize| -> bool {
        missing == 0 && path.len() <= l_max && g.has_edge(*path.last().unwrap(), start)
    };

    if closes(&path, missing) {
        return Some(Cycle::new(path));
    }
    let mut stack = vec![Frame { node: start, candidates: candidates_of(start, 0, &on_path) }];

    while let Some(frame) = stack.last_mut() {
        if frame.candidates.is_empty() {
            let done = stack.pop().unwrap().node;
            path.pop();
            if done != start {
                on_path[done] = false;
                if is_terminal[done] {
                    missing += 1;
                }
            }
            continue;
        }
        // Weighted draw without replacement: weight 1 / dist_sum, with
        // zero-distance nodes (the sole terminal itself) taking the
        // largest weight on the frontier.
        let idx = {
            let cands = &frame.candidates;
            let finite_max = cands
                .iter()
                .filter(|&&v| dist_sum[v] > 0)
                .map(|&v| 1.0 / dist_sum[v] as f64)
                .fold(0.0f64, f64::max);
            let fallback = if finite_max > 0.0 { finite_max } else { 1.0 };
            let weights: Vec<f64> = cands
                .iter()
                .map(|&v| if dist_sum[v] == 0 { fallback } else { 1.0 / dist_sum[v] as f64 })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = cands.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                r -= w;
                if r <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        let v = frame.candidates.swap_remove(idx);

        expansions += 1;
        if expansions > budget {
            return None;
        }

        on_path[v] = true;
        if is_terminal[v] {
            missing -= 1;
        }
        path.push(v);
        if closes(&path, missing) {
            return Some(Cycle::new(path));
        }
        let cands = candidates_of(v, path.len() - 1, &on_path);
        stack.push(Frame { node: v, candidates: cands });
    }
    None
}

/// The four rewiring moves of the local search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChangeKind {
    /// Remove three cycle edges in cycle order and rotate the three
    /// gap segments, directions preserved.
    SequentialPrimary,
    /// Remove four cycle edges in order and swap the two non-adjacent
    /// segments (equivalently, reverse the segment order).
    Quad,
    /// Replace a cycle path by a single existing chord, shrinking the
    /// cycle; illegal if it would bypass a terminal.
    Shortcut,
    /// Replace one cycle edge (a, b) by (a, v), (v, b) for an off-cycle
    /// node v, growing the cycle by one edge up to l_max.
    Extend,
}

pub const ALL_KINDS: [ChangeKind; 4] = [
    ChangeKind::SequentialPrimary,
    ChangeKind::Quad,
    ChangeKind::Shortcut,
    ChangeKind::Extend,
];

pub const IMPROVE_KINDS: [ChangeKind; 3] = [
    ChangeKind::SequentialPrimary,
    ChangeKind::Quad,
    ChangeKind::Shortcut,
];

/// One legal rewiring of a host cycle.
#[derive(Debug, Clone)]
pub struct Change {
    pub kind: ChangeKind,
    /// Cycle-edge positions removed, ascending.
    pub removed_positions: Vec<usize>,
    pub removed: Vec<(usize, usize)>,
    pub added: Vec<(usize, usize)>,
    pub delta_f: f64,
    /// The cycle after applying the change.
    pub cycle: Cycle,
}

struct ChangeScan<'a> {
    cycle: &'a [usize],
    graph: &'a DiGraph,
    sg: &'a SurprisalGraph,
    p: &'a ICDLParams,
    terminals: &'a [usize],
    l_max: usize,
    /// prefix[i] = surprisal of cycle edges 0..i.
    prefix: Vec<f64>,
    f_before: f64,
}

impl<'a> ChangeScan<'a> {
    fn new(
        cycle: &'a Cycle,
        graph: &'a DiGraph,
        sg: &'a SurprisalGraph,
        p: &'a ICDLParams,
        terminals: &'a [usize],
        l_max: usize,
    ) -> Self {
        let nodes = cycle.nodes();
        let len = nodes.len();
        let mut prefix = vec![0.0; len + 1];
        for i in 0..len {
            let u = nodes[i];
            let v = nodes[(i + 1) % len];
            prefix[i + 1] = prefix[i] + sg.w(u, v).expect("host cycle valid in sg");
        }
        let f_before = score(prefix[len], len, p);
        ChangeScan { cycle: nodes, graph, sg, p, terminals, l_max, prefix, f_before }
    }

    fn len(&self) -> usize {
        self.cycle.len()
    }

    fn ic_total(&self) -> f64 {
        self.prefix[self.len()]
    }

    /// Surprisal of cycle edges at positions from..to (cyclic, exclusive).
    fn arc_w(&self, from: usize, to: usize) -> f64 {
        if from <= to {
            self.prefix[to] - self.prefix[from]
        } else {
            self.ic_total() - self.prefix[from] + self.prefix[to]
        }
    }

    fn edge_w(&self, pos: usize) -> f64 {
        self.prefix[pos + 1] - self.prefix[pos]
    }

    fn w(&self, u: usize, v: usize) -> Option<f64> {
        self.sg.w(u, v)
    }

    /// Node indices from position `from` to `to` exclusive, walking the
    /// cycle forward.
    fn collect_range(&self, from: usize, to: usize, out: &mut Vec<usize>) {
        let len = self.len();
        let mut i = from % len;
        while i != to % len {
            out.push(self.cycle[i]);
            i = (i + 1) % len;
        }
    }

    fn for_each_primary(&self, mut visit: impl FnMut(Change)) {
        let len = self.len();
        if len < 3 {
            return;
        }
        for i in 0..len {
            for j in (i + 1)..len {
                for k in (j + 1)..len {
                    let (a, b) = (self.cycle[i], self.cycle[(i + 1) % len]);
                    let (c, d) = (self.cycle[j], self.cycle[(j + 1) % len]);
                    let (e, f) = (self.cycle[k], self.cycle[(k + 1) % len]);
                    let (Some(w_ad), Some(w_cf), Some(w_eb)) =
                        (self.w(a, d), self.w(c, f), self.w(e, b))
                    else {
                        continue;
                    };
                    let removed_w = self.edge_w(i) + self.edge_w(j) + self.edge_w(k);
                    let ic_after = self.ic_total() - removed_w + w_ad + w_cf + w_eb;
                    let delta_f = score(ic_after, len, self.p) - self.f_before;
                    let mut nodes = Vec::with_capacity(len);
                    nodes.push(a);
                    self.collect_range(j + 1, k + 1, &mut nodes);
                    self.collect_range(i + 1, j + 1, &mut nodes);
                    self.collect_range(k + 1, i, &mut nodes);
                    visit(Change {
                        kind: ChangeKind::SequentialPrimary,
                        removed_positions: vec![i, j, k],
                        removed: vec![(a, b), (c, d), (e, f)],
                        added: vec![(a, d), (c, f), (e, b)],
                        delta_f,
                        cycle: Cycle::new(nodes),
                    });
                }
            }
        }
    }

    fn for_each_quad(&self, mut visit: impl FnMut(Change)) {
        let len = self.len();
        if len < 4 {
            return;
        }
        for i in 0..len {
            for j in (i + 1)..len {
                for k in (j + 1)..len {
                    for l in (k + 1)..len {
                        let (a1, b1) = (self.cycle[i], self.cycle[(i + 1) % len]);
                        let (a2, b2) = (self.cycle[j], self.cycle[(j + 1) % len]);
                        let (a3, b3) = (self.cycle[k], self.cycle[(k + 1) % len]);
                        let (a4, b4) = (self.cycle[l], self.cycle[(l + 1) % len]);
                        let (Some(w1), Some(w2), Some(w3), Some(w4)) = (
                            self.w(a1, b3),
                            self.w(a4, b2),
                            self.w(a3, b1),
                            self.w(a2, b4),
                        ) else {
                            continue;
                        };
                        let removed_w =
                            self.edge_w(i) + self.edge_w(j) + self.edge_w(k) + self.edge_w(l);
                        let ic_after = self.ic_total() - removed_w + w1 + w2 + w3 + w4;
                        let delta_f = score(ic_after, len, self.p) - self.f_before;
                        let mut nodes = Vec::with_capacity(len);
                        nodes.push(a1);
                        self.collect_range(k + 1, l + 1, &mut nodes);
                        self.collect_range(j + 1, k + 1, &mut nodes);
                        self.collect_range(i + 1, j + 1, &mut nodes);
                        self.collect_range(l + 1, i, &mut nodes);
                        visit(Change {
                            kind: ChangeKind::Quad,
                            removed_positions: vec![i, j, k, l],
                            removed: vec![(a1, b1), (a2, b2), (a3, b3), (a4, b4)],
                            added: vec![(a1, b3), (a4, b2), (a3, b1), (a2, b4)],
                            delta_f,
                            cycle: Cycle::new(nodes),
                        });
                    }
                }
            }
        }
    }

    fn for_each_shortcut(&self, mut visit: impl FnMut(Change)) {
        let len = self.len();
        if len < 3 {
            return;
        }
        for i in 0..len {
            for gap in 2..len {
                let j = (i + gap) % len;
                let (a, b) = (self.cycle[i], self.cycle[j]);
                let Some(w_ab) = self.w(a, b) else {
                    continue;
                };
                // Bypassed nodes may not include a terminal.
                let mut bypassed_terminal = false;
                let mut pos = (i + 1) % len;
                while pos != j {
                    if self.terminals.contains(&self.cycle[pos]) {
                        bypassed_terminal = true;
                        break;
                    }
                    pos = (pos + 1) % len;
                }
                if bypassed_terminal {
                    continue;
                }
                let removed_w = self.arc_w(i, j);
                let new_len = len - gap + 1;
                let ic_after = self.ic_total() - removed_w + w_ab;
                let delta_f = score(ic_after, new_len, self.p) - self.f_before;
                let mut nodes = Vec::with_capacity(new_len);
                nodes.push(a);
                self.collect_range(j, i, &mut nodes);
                let mut removed = Vec::with_capacity(gap);
                let mut removed_positions = Vec::with_capacity(gap);
                let mut pos = i;
                while pos != j {
                    removed.push((self.cycle[pos], self.cycle[(pos + 1) % len]));
                    removed_positions.push(pos);
                    pos = (pos + 1) % len;
                }
                removed_positions.sort_unstable();
                visit(Change {
                    kind: ChangeKind::Shortcut,
                    removed_positions,
                    removed,
                    added: vec![(a, b)],
                    delta_f,
                    cycle: Cycle::new(nodes),
                });
            }
        }
    }

    fn for_each_extend(&self, mut visit: impl FnMut(Change)) {
        let len = self.len();
        if len + 1 > self.l_max {
            return;
        }
        let on_cycle = {
            let mut mask = vec![false; self.graph.node_count()];
            for &v in self.cycle {
                mask[v] = true;
            }
            mask
        };
        for i in 0..len {
            let (a, b) = (self.cycle[i], self.cycle[(i + 1) % len]);
            for (v, _) in self.graph.out_neighbors(a) {
                if on_cycle[v] {
                    continue;
                }
                let (Some(w_av), Some(w_vb)) = (self.w(a, v), self.w(v, b)) else {
                    continue;
                };
                let ic_after = self.ic_total() - self.edge_w(i) + w_av + w_vb;
                let delta_f = score(ic_after, len + 1, self.p) - self.f_before;
                let mut nodes = Vec::with_capacity(len + 1);
                nodes.extend_from_slice(&self.cycle[..=i]);
                nodes.push(v);
                nodes.extend_from_slice(&self.cycle[i + 1..]);
                visit(Change {
                    kind: ChangeKind::Extend,
                    removed_positions: vec![i],
                    removed: vec![(a, b)],
                    added: vec![(a, v), (v, b)],
                    delta_f,
                    cycle: Cycle::new(nodes),
                });
            }
        }
    }

    fn for_each(&self, kinds: &[ChangeKind], mut visit: impl FnMut(Change)) {
        if kinds.contains(&ChangeKind::SequentialPrimary) {
            self.for_each_primary(&mut visit);
        }
        if kinds.contains(&ChangeKind::Quad) {
            self.for_each_quad(&mut visit);
        }
        if kinds.contains(&ChangeKind::Shortcut) {
            self.for_each_shortcut(&mut visit);
        }
        if kinds.contains(&ChangeKind::Extend) {
            self.for_each_extend(&mut visit);
        }
    }
}

/// Every legal change of the requested kinds for `cycle`, which must be a
/// valid cycle of `sg`'s topology. Terminal and length legality are judged
/// against `terminals` and `l_max`.
pub fn enumerate_changes(
    cycle: &Cycle,
    graph: &DiGraph,
    sg: &SurprisalGraph,
    p: &ICDLParams,
    terminals: &[usize],
    l_max: usize,
    kinds: &[ChangeKind],
) -> Vec<Change> {
    let scan = ChangeScan::new(cycle, graph, sg, p, terminals, l_max);
    let mut out = Vec::new();
    scan.for_each(kinds, |c| out.push(c));
    out
}

/// Largest-improvement selection over a stream of changes; ties prefer
/// the lexicographically smallest removed-position set, then the kind
/// enumeration order.
fn keep_better(best: &mut Option<Change>, candidate: Change) {
    match best {
        Some(b)
            if candidate.delta_f < b.delta_f
                || (candidate.delta_f == b.delta_f
                    && candidate.removed_positions >= b.removed_positions) => {}
        _ => *best = Some(candidate),
    }
}

/// Per-restart record of the search trajectory.
#[derive(Debug, Clone)]
pub struct RestartTrace {
    pub restart: usize,
    /// F of the initial DFS cycle, when one was found.
    pub initial_f: Option<f64>,
    /// F of the restart's final (locally optimal) cycle.
    pub final_f: Option<f64>,
}

/// Outcome of the full multi-restart search.
#[derive(Debug, Clone)]
pub struct LocalSearchResult {
    /// Best cycle over all restarts with its F; `None` when no restart
    /// found an initial cycle. Absence does not certify that no
    /// qualifying cycle exists (the DFS is randomized and budgeted),
    /// except when pruning itself proved it.
    pub best: Option<(Cycle, f64)>,
    pub restarts: Vec<RestartTrace>,
    /// True when pruning already showed no qualifying cycle can exist.
    pub infeasible: bool,
}

impl LocalSearchResult {
    /// Best initial F over all restarts.
    pub fn best_initial_f(&self) -> Option<f64> {
        self.restarts
            .iter()
            .filter_map(|t| t.initial_f)
            .fold(None, |acc, f| Some(acc.map_or(f, |a: f64| a.max(f))))
    }
}

fn greedy_improve(
    mut cycle: Cycle,
    graph: &DiGraph,
    sg: &SurprisalGraph,
    p: &ICDLParams,
    terminals: &[usize],
    l_max: usize,
) -> (Cycle, f64) {
    loop {
        let scan = ChangeScan::new(&cycle, graph, sg, p, terminals, l_max);
        let f_before = scan.f_before;
        let mut best: Option<Change> = None;
        scan.for_each(&IMPROVE_KINDS, |c| keep_better(&mut best, c));
        match best {
            Some(change) if change.delta_f > EPS_IMPROVE => {
                debug_assert!(graph.validate_cycle(change.cycle.nodes()));
                cycle = change.cycle;
            }
            _ => return (cycle, f_before),
        }
    }
}

/// Runs the full local search: prune, guided DFS initialization, an
/// extension phase growing the cycle to `l_max` (applying the best extend
/// change even when it hurts, while remembering the best cycle seen), and
/// a greedy best-improvement phase over the primary, quad and shortcut
/// moves until no change improves F. The best trajectory cycle is itself
/// polished to a local optimum, so the returned cycle always is one.
/// Restarts differ only in their RNG stream; the overall best F wins,
/// earliest restart on ties.
pub fn local_search(
    graph: &DiGraph,
    sg: &SurprisalGraph,
    query: &SteinerQuery,
    p: &ICDLParams,
) -> LocalSearchResult {
    let terminals = query.terminals();
    let l_max = query.l_max;
    let Some(pruned) = prune(graph, query) else {
        return LocalSearchResult {
            best: None,
            restarts: (0..query.restarts)
                .map(|restart| RestartTrace { restart, initial_f: None, final_f: None })
                .collect(),
            infeasible: true,
        };
    };

    let mut best: Option<(Cycle, f64)> = None;
    let mut traces = Vec::with_capacity(query.restarts);
    for restart in 0..query.restarts {
        let stream = query.seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(restart as u64 + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let Some(found) = initial_cycle(&pruned, l_max, &mut rng) else {
            traces.push(RestartTrace { restart, initial_f: None, final_f: None });
            continue;
        };
        let initial = Cycle::new(found.nodes().iter().map(|&v| pruned.kept[v]).collect());
        debug_assert!(graph.validate_cycle(initial.nodes()));
        let initial_f = score(
            ic(&initial, sg).expect("initial cycle valid"),
            initial.len(),
            p,
        );

        // Extension phase: grow to l_max with the best extend change each
        // step, even a worsening one, tracking the best cycle seen.
        let mut current = initial.clone();
        let mut best_seen = (current.clone(), initial_f);
        while current.len() < l_max {
            let scan = ChangeScan::new(&current, graph, sg, p, terminals, l_max);
            let mut step: Option<Change> = None;
            scan.for_each(&[ChangeKind::Extend], |c| keep_better(&mut step, c));
            let Some(change) = step else {
                break;
            };
            current = change.cycle;
            let current_f =
                score(ic(&current, sg).expect("extended cycle valid"), current.len(), p);
            if current_f > best_seen.1 {
                best_seen = (current.clone(), current_f);
            }
        }

        // Greedy improvement from the fully extended cycle; if the
        // trajectory's best beat that local optimum, polish it too.
        let (opt, opt_f) = greedy_improve(current, graph, sg, p, terminals, l_max);
        let (final_cycle, final_f) = if best_seen.1 > opt_f {
            greedy_improve(best_seen.0, graph, sg, p, terminals, l_max)
        } else {
            (opt, opt_f)
        };
        traces.push(RestartTrace { restart, initial_f: Some(initial_f), final_f: Some(final_f) });
        if best.as_ref().is_none_or(|(_, f)| final_f > *f) {
            best = Some((final_cycle, final_f));
        }
    }
    LocalSearchResult { best, restarts: traces, infeasible: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::uniform_surprisal_graph;
    use crate::graph::DiGraph;

    fn ring(n: usize, w: f64) -> DiGraph {
        DiGraph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, w))).unwrap()
    }

    fn query(terminals: Vec<usize>, l_max: usize) -> SteinerQuery {
        SteinerQuery::new(terminals, l_max, 5, 0).unwrap()
    }

    #[test]
    fn query_validation() {
        assert!(matches!(SteinerQuery::new(vec![], 5, 1, 0), Err(QueryError::NoTerminals)));
        assert!(matches!(
            SteinerQuery::new(vec![0, 1, 2], 2, 1, 0),
            Err(QueryError::LmaxTooSmall { .. })
        ));
        assert!(matches!(SteinerQuery::new(vec![0], 5, 0, 0), Err(QueryError::NoRestarts)));
        // Duplicates collapse before the k <= l_max check.
        assert!(SteinerQuery::new(vec![1, 1, 1], 1, 1, 0).is_ok());
    }

    #[test]
    fn prune_keeps_cycle_through_single_terminal() {
        let g = ring(5, 1.0);
        let pruned = prune(&g, &query(vec![2], 5)).unwrap();
        assert_eq!(pruned.graph.node_count(), 5);
        assert_eq!(pruned.terminals, vec![2]);
    }

    #[test]
    fn prune_drops_far_nodes() {
        // Ring of 6 plus a chord 0 -> 3: with l_max = 4 and terminal 0,
        // nodes 1 and 2 sit on no short enough closed walk through 0.
        let mut g = ring(6, 1.0);
        g.add_edge(0, 3, 1.0).unwrap();
        let pruned = prune(&g, &query(vec![0], 4)).unwrap();
        assert_eq!(pruned.kept, vec![0, 3, 4, 5]);
    }

    #[test]
    fn prune_reports_disconnected_terminal() {
        // A 4-ring plus a dangling node 4 with no way back.
        let mut g = DiGraph::new(5);
        for i in 0..4 {
            g.add_edge(i, (i + 1) % 4, 1.0).unwrap();
        }
        g.add_edge(3, 4, 1.0).unwrap();
        // A lone terminal trivially satisfies its own pair constraint and
        // survives as an isolated kept node.
        let lone = prune(&g, &query(vec![4], 5)).unwrap();
        assert_eq!(lone.kept, vec![4]);
        // Paired with a real terminal the unreachable one fails the test.
        assert!(prune(&g, &query(vec![0, 4], 5)).is_none());
    }

    #[test]
    fn prune_matches_all_pairs_filter() {
        // Floyd-Warshall hop counts as the independent oracle.
        for seed in 0..20u64 {
            let g = crate::oracle::gen_erdos(20, 0.2, 1, 10, seed);
            let terminals = vec![1, 4, 9];
            let l_max = 6;
            let n = g.node_count();
            let inf = usize::MAX / 4;
            let mut dist = vec![vec![inf; n]; n];
            for v in 0..n {
                dist[v][v] = 0;
            }
            for e in g.edges() {
                dist[e.src][e.dst] = 1;
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        dist[i][j] = dist[i][j].min(dist[i][k] + dist[k][j]);
                    }
                }
            }
            let expect: Vec<usize> = (0..n)
                .filter(|&v| terminals.iter().all(|&q| dist[q][v] + dist[v][q] <= l_max))
                .collect();
            let got = prune(&g, &query(terminals.clone(), l_max));
            if terminals.iter().any(|&q| !expect.contains(&q)) {
                assert!(got.is_none(), "seed {seed}");
            } else {
                assert_eq!(got.unwrap().kept, expect, "seed {seed}");
            }
        }
    }

    #[test]
    fn initial_cycle_finds_unique_ring() {
        let g = ring(6, 1.0);
        let q = query(vec![0, 3], 6);
        let pruned = prune(&g, &q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = initial_cycle(&pruned, 6, &mut rng).unwrap();
        assert_eq!(c.len(), 6);
        assert!(pruned.graph.validate_cycle(c.nodes()));
    }

    #[test]
    fn initial_cycle_absent_when_no_cycle_through_terminal() {
        // 0 -> 1 -> 2 with a cycle only between 1 and 2: pruning keeps the
        // lone terminal, the search comes back empty-handed.
        let g = DiGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        let q = query(vec![0], 3);
        let pruned = prune(&g, &q).unwrap();
        assert_eq!(pruned.kept, vec![0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(initial_cycle(&pruned, 3, &mut rng).is_none());
    }

    #[test]
    fn initial_cycle_self_loop_terminal() {
        let g = DiGraph::from_edges(2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let q = query(vec![0], 1);
        let pruned = prune(&g, &q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = initial_cycle(&pruned, 1, &mut rng).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn no_changes_on_bare_triangle() {
        let g = ring(3, 1.0);
        let sg = uniform_surprisal_graph(&g);
        let p = ICDLParams::from_q(0.1, 3).unwrap();
        let cycle = Cycle::new(vec![0, 1, 2]);
        let changes = enumerate_changes(&cycle, &g, &sg, &p, &[0], 3, &ALL_KINDS);
        assert!(changes.is_empty(), "got {changes:?}");
    }

    #[test]
    fn single_chord_yields_one_shortcut() {
        // 4-cycle [0,1,2,3] plus chord (0, 2); node 1 is bypassed.
        let mut g = ring(4, 1.0);
        g.add_edge(0, 2, 1.0).unwrap();
        let sg = uniform_surprisal_graph(&g);
        let p = ICDLParams::from_q(0.1, 4).unwrap();
        let cycle = Cycle::new(vec![0, 1, 2, 3]);
        let all = enumerate_changes(&cycle, &g, &sg, &p, &[0, 2], 4, &ALL_KINDS);
        assert_eq!(all.len(), 1);
        let c = &all[0];
        assert_eq!(c.kind, ChangeKind::Shortcut);
        assert_eq!(c.added, vec![(0, 2)]);
        assert_eq!(c.cycle.canonical().nodes(), &[0, 2, 3]);
        // With terminal 1 the shortcut becomes illegal.
        let none = enumerate_changes(&cycle, &g, &sg, &p, &[1], 4, &ALL_KINDS);
        assert!(none.is_empty());
    }

    #[test]
    fn extend_respects_l_max() {
        // Triangle 0,1,2 plus a detour node 3 on the (0,1) edge.
        let mut g = DiGraph::new(4);
        for (u, v) in [(0, 1), (1, 2), (2, 0), (0, 3), (3, 1)] {
            g.add_edge(u, v, 1.0).unwrap();
        }
        let sg = uniform_surprisal_graph(&g);
        let p = ICDLParams::from_q(0.1, 4).unwrap();
        let cycle = Cycle::new(vec![0, 1, 2]);
        let grown = enumerate_changes(&cycle, &g, &sg, &p, &[0], 4, &[ChangeKind::Extend]);
        assert_eq!(grown.len(), 1);
        assert_eq!(grown[0].cycle.nodes(), &[0, 3, 1, 2]);
        let capped = enumerate_changes(&cycle, &g, &sg, &p, &[0], 3, &[ChangeKind::Extend]);
        assert!(capped.is_empty());
    }

    #[test]
    fn changes_apply_to_valid_cycles_with_consistent_delta() {
        let p = ICDLParams::from_q(0.1, 12).unwrap();
        for seed in 0..20u64 {
            let g = crate::oracle::gen_erdos(12, 0.35, 1, 100, seed);
            let sg = crate::interestingness::SurprisalGraph::new(g.clone());
            let Some(mc) = crate::mmc::karp_mmc(&sg) else { continue };
            let cycle = mc.cycle;
            let terminals = vec![cycle.nodes()[0]];
            let f0 = crate::interestingness::interestingness(&cycle, &sg, &p).unwrap();
            for c in enumerate_changes(&cycle, &g, &sg, &p, &terminals, 12, &ALL_KINDS) {
                assert!(g.validate_cycle(c.cycle.nodes()), "seed {seed}: {c:?}");
                assert!(terminals.iter().all(|t| c.cycle.contains(*t)));
                assert!(c.cycle.len() <= 12);
                for (u, v) in &c.added {
                    assert!(g.has_edge(*u, *v));
                }
                let f1 = crate::interestingness::interestingness(&c.cycle, &sg, &p).unwrap();
                assert!(
                    ((f1 - f0) - c.delta_f).abs() <= 1e-9,
                    "seed {seed}: delta {} vs recomputed {}",
                    c.delta_f,
                    f1 - f0
                );
            }
        }
    }

    #[test]
    fn local_search_returns_unique_ring() {
        let n = 7;
        let g = ring(n, 2.0);
        let sg = crate::interestingness::SurprisalGraph::new(g.clone());
        let p = ICDLParams::from_q(0.1, n).unwrap();
        let q = SteinerQuery::new(vec![0, 4], n, 3, 9).unwrap();
        let got = local_search(&g, &sg, &q, &p);
        let (cycle, f) = got.best.unwrap();
        assert_eq!(cycle.len(), n);
        let expect = 2.0 * n as f64 / (p.alpha * n as f64 + n as f64 * p.beta);
        assert!((f - expect).abs() < 1e-12);
    }

    #[test]
    fn uniform_surprisal_prefers_longer_cycles() {
        // Nested cycles through node 0 of lengths 3..6, each reachable
        // from the previous by one extending change. With one bit per
        // edge, F grows with length, so the search must reach the 6-ring.
        let mut g = ring(6, 5.0);
        for chord in [(1, 5), (1, 4), (1, 3)] {
            g.add_edge(chord.0, chord.1, 5.0).unwrap();
        }
        let sg = uniform_surprisal_graph(&g);
        let p = ICDLParams::from_q(0.2, 6).unwrap();
        let q = SteinerQuery::new(vec![0], 6, 5, 3).unwrap();
        let got = local_search(&g, &sg, &q, &p).best.unwrap();
        assert_eq!(got.0.len(), 6);
    }

    #[test]
    fn local_search_is_deterministic() {
        let g = crate::oracle::gen_erdos(15, 0.25, 1, 1000, 5);
        let sg = crate::interestingness::SurprisalGraph::new(g.clone());
        let p = ICDLParams::from_q(0.05, 15).unwrap();
        let q = SteinerQuery::new(vec![2, 7], 10, 4, 42).unwrap();
        let a = local_search(&g, &sg, &q, &p);
        let b = local_search(&g, &sg, &q, &p);
        match (a.best, b.best) {
            (Some((ca, fa)), Some((cb, fb))) => {
                assert_eq!(ca.nodes(), cb.nodes());
                assert_eq!(fa, fb);
            }
            (None, None) => {}
            other => panic!("runs diverged: {other:?}"),
        }
    }

    #[test]
    fn local_search_result_beats_initials() {
        let p = ICDLParams::from_q(0.05, 14).unwrap();
        for seed in 0..15u64 {
            let g = crate::oracle::gen_erdos(14, 0.25, 1, 5000, seed);
            let sg = crate::interestingness::SurprisalGraph::new(g.clone());
            let Ok(q) = SteinerQuery::new(vec![seed as usize % 14], 14, 5, seed) else {
                continue;
            };
            let got = local_search(&g, &sg, &q, &p);
            if let (Some((_, f)), Some(init)) = (&got.best, got.best_initial_f()) {
                assert!(*f + 1e-9 >= init, "seed {seed}: {f} < {init}");
            }
        }
    }
}
