//! Fixtures and independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use cyclemine::background::Block;
use cyclemine::graph::{Cycle, DiGraph};
use cyclemine::interestingness::{interestingness, ICDLParams, SurprisalGraph};
use cyclemine::oracle::{for_each_cycle, EnumerationBudget};
use cyclemine::steiner::ChangeKind;

/// The 4x4 toy matrix with every row and column sum 100.
pub const TOY_MATRIX: [[f64; 4]; 4] = [
    [0.0, 99.0, 1.0, 0.0],
    [97.0, 0.0, 1.0, 2.0],
    [1.0, 1.0, 0.0, 98.0],
    [2.0, 0.0, 98.0, 0.0],
];

pub fn toy_graph() -> DiGraph {
    let mut g = DiGraph::new(4);
    for (i, row) in TOY_MATRIX.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w > 0.0 {
                g.add_edge(i, j, w).unwrap();
            }
        }
    }
    g
}

/// The zero diagonal as four singleton blocks (the prior schema encodes
/// blocks as row x column products).
pub fn diagonal_blocks() -> Vec<Block> {
    (0..4).map(|i| Block::new(vec![i], vec![i], 0.0)).collect()
}

/// The drawn 2x2 corner block: cells {0,1} x {0,1}, observed mass
/// 99 + 97 = 196 (the diagonal cells inside are pinned to zero).
pub fn corner_block() -> Block {
    Block::new(vec![0, 1], vec![0, 1], 196.0)
}

/// Streams every simple cycle of `g`, handing (nodes, total weight) to
/// the fold, with weights read from a dense matrix for speed. Uncapped:
/// some seeded instances exceed the default ten-million-cycle budget.
pub fn fold_cycles<F: FnMut(&[usize], f64)>(g: &DiGraph, mut fold: F) -> u64 {
    let n = g.node_count();
    let mut w = vec![0.0; n * n];
    for e in g.edges() {
        w[e.src * n + e.dst] = e.weight;
    }
    for_each_cycle(g, EnumerationBudget { max_cycles: u64::MAX }, |nodes| {
        let mut total = 0.0;
        for i in 0..nodes.len() {
            total += w[nodes[i] * n + nodes[(i + 1) % nodes.len()]];
        }
        fold(nodes, total);
    })
    .expect("uncapped enumeration")
}

/// Canonical identity of a change: kind, sorted removed pairs, sorted
/// added pairs.
pub type ChangeKey = (ChangeKind, Vec<(usize, usize)>, Vec<(usize, usize)>);

pub fn change_key(
    kind: ChangeKind,
    removed: &[(usize, usize)],
    added: &[(usize, usize)],
) -> ChangeKey {
    let mut r = removed.to_vec();
    r.sort_unstable();
    let mut a = added.to_vec();
    a.sort_unstable();
    (kind, r, a)
}

/// Replaces `removed` by `added` in the cycle's successor map and traces
/// the orbit from the smallest node. Returns the traced node sequence if
/// the rewired map is a single cycle over the expected node set.
fn trace_rewiring(
    cycle: &[usize],
    removed: &[(usize, usize)],
    added: &[(usize, usize)],
    expected_nodes: &[usize],
) -> Option<Vec<usize>> {
    let mut succ: BTreeMap<usize, usize> = BTreeMap::new();
    let len = cycle.len();
    for i in 0..len {
        succ.insert(cycle[i], cycle[(i + 1) % len]);
    }
    for (u, v) in removed {
        if succ.get(u) != Some(v) {
            return None;
        }
        succ.remove(u);
    }
    for (u, v) in added {
        if succ.insert(*u, *v).is_some() {
            return None; // two out-edges at one node
        }
    }
    let start = *expected_nodes.iter().min()?;
    let mut seq = vec![start];
    let mut cur = start;
    loop {
        cur = *succ.get(&cur)?;
        if cur == start {
            break;
        }
        if seq.contains(&cur) || seq.len() > expected_nodes.len() {
            return None;
        }
        seq.push(cur);
    }
    let mut got = seq.clone();
    got.sort_unstable();
    let mut want = expected_nodes.to_vec();
    want.sort_unstable();
    (got == want).then_some(seq)
}

/// True iff the position tuple is some rotation of its sorted form, i.e.
/// the positions occur in this order walking around the cycle.
fn in_cycle_order(tuple: &[usize]) -> bool {
    let mut sorted = tuple.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    (0..tuple.len()).any(|r| (0..tuple.len()).all(|i| tuple[(r + i) % tuple.len()] == sorted[i]))
}

/// All legal changes of a cycle by sheer enumeration of index tuples:
/// rewire the successor map per the move definition, keep whatever traces
/// to a single valid cycle, deduplicate by canonical key.
pub fn brute_force_changes(
    cycle: &Cycle,
    graph: &DiGraph,
    sg: &SurprisalGraph,
    p: &ICDLParams,
    terminals: &[usize],
    l_max: usize,
) -> BTreeMap<ChangeKey, f64> {
    let nodes = cycle.nodes();
    let len = nodes.len();
    let f_before = interestingness(cycle, sg, p).unwrap();
    let mut out: BTreeMap<ChangeKey, f64> = BTreeMap::new();
    let mut push = |kind: ChangeKind,
                    removed: Vec<(usize, usize)>,
                    added: Vec<(usize, usize)>,
                    expected_nodes: Vec<usize>| {
        let Some(seq) = trace_rewiring(nodes, &removed, &added, &expected_nodes) else {
            return;
        };
        if !graph.validate_cycle(&seq) {
            return;
        }
        let new_cycle = Cycle::new(seq);
        let delta = interestingness(&new_cycle, sg, p).unwrap() - f_before;
        out.insert(change_key(kind, &removed, &added), delta);
    };

    let edge_at = |i: usize| (nodes[i % len], nodes[(i + 1) % len]);

    // Sequential primary: all ordered triples in cycle order.
    for i in 0..len {
        for j in 0..len {
            for k in 0..len {
                if !in_cycle_order(&[i, j, k]) {
                    continue;
                }
                let (a, b) = edge_at(i);
                let (c, d) = edge_at(j);
                let (e, f) = edge_at(k);
                push(
                    ChangeKind::SequentialPrimary,
                    vec![(a, b), (c, d), (e, f)],
                    vec![(a, d), (c, f), (e, b)],
                    nodes.to_vec(),
                );
            }
        }
    }

    // Quad: all ordered quadruples in cycle order; the four crossing
    // edges swap the two non-adjacent segments.
    for i in 0..len {
        for j in 0..len {
            for k in 0..len {
                for l in 0..len {
                    if !in_cycle_order(&[i, j, k, l]) {
                        continue;
                    }
                    let (a1, b1) = edge_at(i);
                    let (a2, b2) = edge_at(j);
                    let (a3, b3) = edge_at(k);
                    let (a4, b4) = edge_at(l);
                    push(
                        ChangeKind::Quad,
                        vec![(a1, b1), (a2, b2), (a3, b3), (a4, b4)],
                        vec![(a1, b3), (a4, b2), (a3, b1), (a2, b4)],
                        nodes.to_vec(),
                    );
                }
            }
        }
    }

    // Shortcut: every ordered pair of distinct cycle positions; the
    // bypassed stretch may not contain a terminal, and replacing a
    // single edge by itself is no change at all.
    for i in 0..len {
        for j in 0..len {
            if i == j || (i + 1) % len == j {
                continue;
            }
            let mut removed = Vec::new();
            let mut bypassed = Vec::new();
            let mut pos = i;
            while pos != j {
                removed.push(edge_at(pos));
                pos = (pos + 1) % len;
                if pos != j {
                    bypassed.push(nodes[pos]);
                }
            }
            if bypassed.iter().any(|v| terminals.contains(v)) {
                continue;
            }
            let expected: Vec<usize> =
                nodes.iter().copied().filter(|v| !bypassed.contains(v)).collect();
            push(ChangeKind::Shortcut, removed, vec![(nodes[i], nodes[j])], expected);
        }
    }

    // Extend: every cycle edge with every off-cycle node, within l_max.
    if len < l_max {
        for i in 0..len {
            let (a, b) = edge_at(i);
            for v in 0..graph.node_count() {
                if nodes.contains(&v) {
                    continue;
                }
                let mut expected = nodes.to_vec();
                expected.push(v);
                push(ChangeKind::Extend, vec![(a, b)], vec![(a, v), (v, b)], expected);
            }
        }
    }
    out
}

/// Runs the change-enumeration-versus-brute-force comparison over random
/// instances; returns (instances with cycles, cycles checked, changes
/// checked). Panics on the first mismatch.
pub fn run_change_equivalence(seeds: std::ops::Range<u64>, max_n: usize) -> (usize, u64, u64) {
    use cyclemine::oracle::{enumerate_cycles, gen_erdos};
    use cyclemine::steiner::{enumerate_changes, ALL_KINDS};

    let mut instances = 0;
    let mut cycles_checked = 0u64;
    let mut changes_checked = 0u64;
    let spread = (max_n - 4).max(1) as u64;
    for seed in seeds {
        let n = 5 + (seed % spread) as usize;
        let graph = gen_erdos(n, 0.35, 1, 50, seed);
        let sg = SurprisalGraph::new(graph.clone());
        let p = ICDLParams::from_q(0.1, n).unwrap();
        let cycles = enumerate_cycles(&graph, EnumerationBudget::default()).unwrap();
        if cycles.is_empty() {
            continue;
        }
        instances += 1;
        for cycle in &cycles {
            // Two terminal configurations and a tight / loose length cap.
            let configs = [
                (vec![cycle.nodes()[0]], n),
                (cycle.nodes().iter().copied().take(2).collect::<Vec<_>>(), cycle.len()),
            ];
            for (terminals, l_max) in configs {
                let got = enumerate_changes(cycle, &graph, &sg, &p, &terminals, l_max, &ALL_KINDS);
                let mut got_keys: BTreeMap<ChangeKey, f64> = BTreeMap::new();
                for c in &got {
                    let k = change_key(c.kind, &c.removed, &c.added);
                    assert!(
                        got_keys.insert(k, c.delta_f).is_none(),
                        "duplicate change emitted: {c:?}"
                    );
                }
                let want = brute_force_changes(cycle, &graph, &sg, &p, &terminals, l_max);
                if got_keys.keys().ne(want.keys()) {
                    let missing: Vec<_> =
                        want.keys().filter(|k| !got_keys.contains_key(*k)).collect();
                    let extra: Vec<_> =
                        got_keys.keys().filter(|k| !want.contains_key(*k)).collect();
                    panic!(
                        "seed {seed} cycle {:?}: missing from enumeration: {missing:?}; \
                         not produced by brute force: {extra:?}",
                        cycle.nodes()
                    );
                }
                for (k, delta) in &got_keys {
                    let brute = want[k];
                    assert!(
                        (delta - brute).abs() <= 1e-9,
                        "seed {seed}: delta mismatch for {k:?}: {delta} vs {brute}"
                    );
                }
                changes_checked += got.len() as u64;
            }
            cycles_checked += 1;
        }
    }
    (instances, cycles_checked, changes_checked)
}
