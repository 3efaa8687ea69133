//! Statistical and oracle-backed checks of the Steiner cycle search.

use cyclemine::interestingness::{interestingness, ICDLParams, SurprisalGraph};
use cyclemine::oracle::{exact_kmsic, for_each_cycle, gen_erdos, EnumerationBudget};
use cyclemine::steiner::{
    enumerate_changes, initial_cycle, local_search, prune, SteinerQuery, IMPROVE_KINDS,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shortest Steiner-cycle existence by exhaustive enumeration.
fn steiner_cycle_exists(graph: &cyclemine::DiGraph, terminals: &[usize], l_max: usize) -> bool {
    let mut found = false;
    for_each_cycle(graph, EnumerationBudget::default(), |nodes| {
        if !found && nodes.len() <= l_max && terminals.iter().all(|t| nodes.contains(t)) {
            found = true;
        }
    })
    .unwrap();
    found
}

#[test]
fn guided_dfs_finds_existing_cycles_most_of_the_time() {
    // Where the oracle proves a qualifying cycle exists, a 5-restart
    // initialization must find one in at least 80% of the instances.
    let l_max = 12;
    let mut solvable = 0;
    let mut found = 0;
    for seed in 0..60u64 {
        let graph = gen_erdos(20, 0.2, 1, 10_000, seed);
        let k = 1 + (seed % 3) as usize * 2; // 1, 3, 5
        let terminals: Vec<usize> = (0..k).map(|i| (seed as usize + 3 * i) % 20).collect();
        let Ok(query) = SteinerQuery::new(terminals.clone(), l_max, 5, seed) else {
            continue;
        };
        if !steiner_cycle_exists(&graph, query.terminals(), l_max) {
            continue;
        }
        solvable += 1;
        let Some(pruned) = prune(&graph, &query) else {
            panic!("seed {seed}: pruning contradicted the oracle");
        };
        let hit = (0..5).any(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (restart + 1));
            initial_cycle(&pruned, l_max, &mut rng).is_some()
        });
        if hit {
            found += 1;
        }
    }
    assert!(solvable >= 30, "too few solvable instances: {solvable}");
    let rate = found as f64 / solvable as f64;
    assert!(rate >= 0.8, "initialization rate {rate:.2} below 0.8 ({found}/{solvable})");
}

#[test]
fn local_search_never_beats_the_oracle() {
    let p = ICDLParams::from_q(0.05, 14).unwrap();
    let budget = EnumerationBudget::default();
    let mut compared = 0;
    for seed in 100..130u64 {
        let graph = gen_erdos(14, 0.25, 1, 10_000, seed);
        let sg = SurprisalGraph::new(graph.clone());
        let terminals = vec![(seed % 14) as usize, ((seed / 2) % 14) as usize];
        let Ok(query) = SteinerQuery::new(terminals, 14, 5, seed) else {
            continue;
        };
        let exact = exact_kmsic(&sg, &p, query.terminals(), budget).unwrap();
        let got = local_search(&graph, &sg, &query, &p);
        if let Some((cycle, f)) = &got.best {
            assert!(graph.validate_cycle(cycle.nodes()), "seed {seed}");
            assert!(query.terminals().iter().all(|t| cycle.contains(*t)));
            assert!(cycle.len() <= query.l_max);
            let recomputed = interestingness(cycle, &sg, &p).unwrap();
            assert!((recomputed - f).abs() <= 1e-9, "seed {seed}");
            let (_, f_star) = exact.as_ref().expect("solver found a cycle the oracle missed");
            assert!(
                *f <= f_star + 1e-9,
                "seed {seed}: local {f} above exact {f_star}"
            );
            compared += 1;
        }
    }
    assert!(compared >= 15, "too few comparisons: {compared}");
}

#[test]
fn local_search_lands_on_local_optima() {
    let p = ICDLParams::from_q(0.05, 16).unwrap();
    for seed in 200..220u64 {
        let graph = gen_erdos(16, 0.2, 1, 10_000, seed);
        let sg = SurprisalGraph::new(graph.clone());
        let Ok(query) = SteinerQuery::new(vec![(seed % 16) as usize], 16, 3, seed) else {
            continue;
        };
        let got = local_search(&graph, &sg, &query, &p);
        if let Some((cycle, f)) = &got.best {
            let improving = enumerate_changes(
                cycle,
                &graph,
                &sg,
                &p,
                query.terminals(),
                query.l_max,
                &IMPROVE_KINDS,
            )
            .into_iter()
            .filter(|c| c.delta_f > 1e-9)
            .count();
            assert_eq!(improving, 0, "seed {seed}: F {f} has {improving} improving moves");
        }
    }
}
