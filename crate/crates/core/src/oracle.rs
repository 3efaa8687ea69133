//! Exhaustive solvers and instance generators used for verification:
//! Johnson cycle enumeration, exact best-cycle search, an Erdos-Renyi
//! generator and the two-copy hardness gadget.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Cycle, DiGraph, GraphError};
use crate::interestingness::{score, ICDLParams, SurprisalGraph};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("cycle budget exceeded after {0} cycles")]
    BudgetExceeded(u64),
    #[error("gadget marked node {0} invalid for base graph of order {1}")]
    BadMarkedNode(usize, usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Cap on the number of cycles an enumeration may yield.
#[derive(Debug, Clone, Copy)]
pub struct EnumerationBudget {
    pub max_cycles: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget { max_cycles: 10_000_000 }
    }
}

/// Tarjan's strongly connected components, iterative. Returns one Vec of
/// node ids per component.
fn strongly_connected_components(n: usize, adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    #[derive(Clone, Copy)]
    struct NodeState {
        index: u32,
        lowlink: u32,
        on_stack: bool,
        visited: bool,
    }
    let mut state = vec![
        NodeState { index: 0, lowlink: 0, on_stack: false, visited: false };
        n
    ];
    let mut counter = 0u32;
    let mut stack: Vec<usize> = Vec::new();
    let mut components = Vec::new();
    // Work items: (node, next child offset).
    let mut work: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if state[root].visited {
            continue;
        }
        work.push((root, 0));
        while let Some(&mut (v, ref mut child)) = work.last_mut() {
            if *child == 0 {
                state[v].visited = true;
                state[v].index = counter;
                state[v].lowlink = counter;
                counter += 1;
                stack.push(v);
                state[v].on_stack = true;
            }
            let mut recursed = false;
            while *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                if !state[w].visited {
                    work.push((w, 0));
                    recursed = true;
                    break;
                } else if state[w].on_stack {
                    state[v].lowlink = state[v].lowlink.min(state[w].index);
                }
            }
            if recursed {
                continue;
            }
            if state[v].lowlink == state[v].index {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    state[w].on_stack = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                components.push(comp);
            }
            work.pop();
            if let Some(&mut (parent, _)) = work.last_mut() {
                state[parent].lowlink = state[parent].lowlink.min(state[v].lowlink);
            }
        }
    }
    components
}

struct Johnson<'a, F: FnMut(&[usize])> {
    adj: Vec<Vec<usize>>,
    blocked: Vec<bool>,
    block_map: Vec<Vec<usize>>,
    path: Vec<usize>,
    start: usize,
    count: u64,
    max_cycles: u64,
    emit: &'a mut F,
}

impl<'a, F: FnMut(&[usize])> Johnson<'a, F> {
    fn unblock(&mut self, v: usize) {
        let mut queue = vec![v];
        while let Some(u) = queue.pop() {
            if self.blocked[u] {
                self.blocked[u] = false;
                queue.append(&mut self.block_map[u]);
            }
        }
    }

    fn circuit(&mut self, v: usize) -> Result<bool, OracleError> {
        let mut found = false;
        self.path.push(v);
        self.blocked[v] = true;
        for i in 0..self.adj[v].len() {
            let w = self.adj[v][i];
            if w == self.start {
                if self.count == self.max_cycles {
                    return Err(OracleError::BudgetExceeded(self.count));
                }
                self.count += 1;
                (self.emit)(&self.path);
                found = true;
            } else if !self.blocked[w] && self.circuit(w)? {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for i in 0..self.adj[v].len() {
                let w = self.adj[v][i];
                if !self.block_map[w].contains(&v) {
                    self.block_map[w].push(v);
                }
            }
        }
        self.path.pop();
        Ok(found)
    }
}

/// Visits every simple directed cycle of `graph` exactly once, in canonical
/// form (rotated so the smallest node id comes first). Self-loops are
/// emitted as single-node cycles. Returns the number of cycles visited, or
/// `BudgetExceeded` past the cap.
pub fn for_each_cycle<F: FnMut(&[usize])>(
    graph: &DiGraph,
    budget: EnumerationBudget,
    mut emit: F,
) -> Result<u64, OracleError> {
    let n = graph.node_count();
    let mut count = 0u64;
    for v in 0..n {
        if graph.has_edge(v, v) {
            if count == budget.max_cycles {
                return Err(OracleError::BudgetExceeded(count));
            }
            count += 1;
            emit(&[v]);
        }
    }

    // Johnson's scheme: for each start node s, search the strongly
    // connected component of s within the subgraph induced on {s, ..., n-1}.
    // Every cycle is then found exactly once, from its smallest node.
    for start in 0..n {
        let adj_restricted: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                if v < start {
                    Vec::new()
                } else {
                    graph
                        .out_neighbors(v)
                        .map(|(w, _)| w)
                        .filter(|&w| w >= start && w != v)
                        .collect()
                }
            })
            .collect();
        let comps = strongly_connected_components(n, &adj_restricted);
        let comp = match comps.iter().find(|c| c.contains(&start)) {
            Some(c) if c.len() > 1 => c,
            _ => continue,
        };
        let in_comp = {
            let mut mask = vec![false; n];
            for &v in comp {
                mask[v] = true;
            }
            mask
        };
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                if in_comp[v] {
                    adj_restricted[v].iter().copied().filter(|&w| in_comp[w]).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let mut search = Johnson {
            adj,
            blocked: vec![false; n],
            block_map: vec![Vec::new(); n],
            path: Vec::new(),
            start,
            count,
            max_cycles: budget.max_cycles,
            emit: &mut emit,
        };
        search.circuit(start)?;
        count = search.count;
    }
    Ok(count)
}

/// Collects every simple cycle of `graph` as canonical [`Cycle`]s.
pub fn enumerate_cycles(
    graph: &DiGraph,
    budget: EnumerationBudget,
) -> Result<Vec<Cycle>, OracleError> {
    let mut out = Vec::new();
    for_each_cycle(graph, budget, |nodes| out.push(Cycle::new(nodes.to_vec())))?;
    Ok(out)
}

/// Compares two candidate optima: higher F wins; ties prefer the shorter
/// cycle, then the lexicographically smaller canonical node sequence.
fn better(candidate: &(Cycle, f64), incumbent: &(Cycle, f64)) -> bool {
    if candidate.1 != incumbent.1 {
        return candidate.1 > incumbent.1;
    }
    if candidate.0.len() != incumbent.0.len() {
        return candidate.0.len() < incumbent.0.len();
    }
    candidate.0.nodes() < incumbent.0.nodes()
}

/// F-maximal simple cycle by exhaustive enumeration. `None` when the graph
/// is acyclic.
pub fn exact_msic(
    sg: &SurprisalGraph,
    p: &ICDLParams,
    budget: EnumerationBudget,
) -> Result<Option<(Cycle, f64)>, OracleError> {
    exact_best(sg, p, budget, |_| true)
}

/// F-maximal simple cycle containing every terminal, by exhaustive
/// enumeration. `None` when no such cycle exists.
pub fn exact_kmsic(
    sg: &SurprisalGraph,
    p: &ICDLParams,
    terminals: &[usize],
    budget: EnumerationBudget,
) -> Result<Option<(Cycle, f64)>, OracleError> {
    exact_best(sg, p, budget, |nodes| {
        terminals.iter().all(|t| nodes.contains(t))
    })
}

fn exact_best(
    sg: &SurprisalGraph,
    p: &ICDLParams,
    budget: EnumerationBudget,
    mut keep: impl FnMut(&[usize]) -> bool,
) -> Result<Option<(Cycle, f64)>, OracleError> {
    let g = sg.graph();
    let mut best: Option<(Cycle, f64)> = None;
    for_each_cycle(g, budget, |nodes| {
        if !keep(nodes) {
            return;
        }
        let mut ic = 0.0;
        for i in 0..nodes.len() {
            let u = nodes[i];
            let v = nodes[(i + 1) % nodes.len()];
            ic += g.weight(u, v).expect("enumerated edge exists");
        }
        let f = score(ic, nodes.len(), p);
        let candidate = (Cycle::new(nodes.to_vec()), f);
        match &best {
            Some(incumbent) if !better(&candidate, incumbent) => {}
            _ => best = Some(candidate),
        }
    })?;
    Ok(best)
}

/// Erdos-Renyi digraph: every ordered pair (i, j), i != j, is an edge
/// independently with probability `p`; weights are uniform integers in
/// `[w_lo, w_hi]`.
pub fn gen_erdos(n: usize, p: f64, w_lo: u64, w_hi: u64, seed: u64) -> DiGraph {
    assert!((0.0..=1.0).contains(&p), "edge probability out of range");
    assert!(w_lo <= w_hi, "weight range empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DiGraph::new(n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if rng.gen::<f64>() < p {
                let w = rng.gen_range(w_lo..=w_hi) as f64;
                g.add_edge(i, j, w).expect("generator emits valid edges");
            }
        }
    }
    g
}

/// Two-copy gadget from the polynomial-inapproximability construction.
///
/// `marked` holds the four distinguished nodes of `base` in role order
/// (1, 2, 3, 4). The gadget consists of two copies of `base`'s topology,
/// connecting node 2 of the first copy to node 1 of the second and node 4
/// of the second back to node 3 of the first, plus the closing edges (4,1)
/// in copy one and (2,3) in copy two. All weights are 1 except the copy-two
/// edge (2,3), which carries W = n * poly_value + 1 for gadget order n.
/// Returns the gadget and the terminal node (node 1 of copy one).
pub fn gen_r2vdp_gadget(
    base: &DiGraph,
    marked: [usize; 4],
    poly_value: f64,
) -> Result<(DiGraph, usize), OracleError> {
    let nb = base.node_count();
    if nb < 4 {
        return Err(OracleError::BadMarkedNode(marked[0], nb));
    }
    for (i, &m) in marked.iter().enumerate() {
        if m >= nb {
            return Err(OracleError::BadMarkedNode(m, nb));
        }
        if marked[..i].contains(&m) {
            return Err(OracleError::BadMarkedNode(m, nb));
        }
    }
    let n = 2 * nb;
    let heavy = (n as f64) * poly_value + 1.0;
    let (m1, m2, m3, m4) = (marked[0], marked[1], marked[2], marked[3]);

    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for e in base.edges() {
        edges.push((e.src, e.dst, 1.0));
        edges.push((e.src + nb, e.dst + nb, 1.0));
    }
    let upsert = |src: usize, dst: usize, w: f64, edges: &mut Vec<(usize, usize, f64)>| {
        if let Some(entry) = edges.iter_mut().find(|(s, d, _)| *s == src && *d == dst) {
            entry.2 = w;
        } else {
            edges.push((src, dst, w));
        }
    };
    upsert(m2, m1 + nb, 1.0, &mut edges);
    upsert(m4 + nb, m3, 1.0, &mut edges);
    upsert(m4, m1, 1.0, &mut edges);
    upsert(m2 + nb, m3 + nb, heavy, &mut edges);

    let gadget = DiGraph::from_edges(n, edges)?;
    Ok((gadget, m1))
}
