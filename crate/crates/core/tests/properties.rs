//! Randomized invariants of every protocol against centralized oracles.

use std::collections::{BTreeMap, BTreeSet};

use kt1sim::bfscover::{
    bfs_construction, cover_kappa, randomized_leader_election, BfsOptions, ElectionOptions, PingPolicy,
};
use kt1sim::covers::{cover_construction, verify_cover, CoverParams};
use kt1sim::gossipspanner::{
    canonical_mst, deterministic_bfs, deterministic_leader_election, global_pipeline,
    haeupler_local_broadcast, iteration_budget, GlobalProblem,
};
use kt1sim::harness::flood_baseline_bfs;
use kt1sim::netgraph::{generate_graph, log2_ceil, oracle_bfs, Graph, GraphFamily, GraphGenSpec, IdScheme, NodeId};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = GraphFamily> {
    prop_oneof![
        Just(GraphFamily::Path),
        Just(GraphFamily::Cycle),
        Just(GraphFamily::Star),
        Just(GraphFamily::Complete),
        Just(GraphFamily::Grid),
        Just(GraphFamily::BalancedBinaryTree),
        (0.1f64..0.5).prop_map(|p| GraphFamily::ErdosRenyi { p }),
    ]
}

prop_compose! {
    fn graph(max_n: usize)(f in family(), n in 1..max_n, seed in any::<u64>()) -> (Graph, u64) {
        let spec = GraphGenSpec::new(f, n).with_ids(IdScheme::RandomPermutation).with_seed(seed);
        (generate_graph(&spec).unwrap(), seed)
    }
}

fn oracle_layers(g: &Graph, root: NodeId) -> BTreeMap<NodeId, u32> {
    oracle_bfs(g, root).unwrap().dist
}

/// Prim from the smallest id under the same `(min, max)` edge order.
fn prim(g: &Graph) -> BTreeSet<(NodeId, NodeId)> {
    let mut inside = BTreeSet::from([g.ids()[0]]);
    let mut out = BTreeSet::new();
    while inside.len() < g.n() {
        let e = g
            .edges()
            .filter(|(u, v)| inside.contains(u) != inside.contains(v))
            .min()
            .expect("connected");
        inside.insert(e.0);
        inside.insert(e.1);
        out.insert(e);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cover_bfs_is_exact((g, seed) in graph(40), pick in any::<prop::sample::Index>(), literal in any::<bool>()) {
        let root = g.ids()[pick.index(g.n())];
        let options = BfsOptions {
            seed,
            ping_policy: if literal { PingPolicy::EveryCluster } else { PingPolicy::CoveringCluster },
            record_activity: false,
        };
        let run = bfs_construction(&g, root, &options).unwrap();
        prop_assert_eq!(&run.tree.layer, &oracle_layers(&g, root));
        for (&v, &k) in &run.explore_receipts {
            prop_assert_eq!(k, u64::from(v != root));
        }
        prop_assert!(run.all_halted);
    }

    #[test]
    fn cover_properties((g, seed) in graph(60)) {
        let kappa = cover_kappa(g.n());
        let run = cover_construction(&g, &CoverParams::new(kappa, 2, seed)).unwrap();
        let report = verify_cover(&run.cover, &g);
        prop_assert!(report.depth_ok);
        prop_assert!(report.max_depth <= 2 * kappa * 2);
        for c in &run.cover.clusters {
            prop_assert!(c.validate_in(&g).is_ok());
        }
    }

    #[test]
    fn spanner_invariants((g, _) in graph(80)) {
        let run = haeupler_local_broadcast(&g).unwrap();
        let n = g.n();
        let h = &run.spanner;
        prop_assert!(run.complete);
        prop_assert!(h.iterations <= iteration_budget(n));
        prop_assert!(h.size() <= 2 * n * log2_ceil(n).max(1) as usize);
        let hg = h.graph(&g).unwrap();
        prop_assert!(hg.edges().all(|(u, v)| g.has_edge(u, v)));
        for (u, v) in g.edges() {
            let d = oracle_bfs(&hg, u).unwrap().get(v).unwrap();
            prop_assert!(d <= 4 * h.iterations, "({u},{v}) at H-distance {d}, I = {}", h.iterations);
        }
    }

    #[test]
    fn spanner_bfs_is_exact((g, _) in graph(80), pick in any::<prop::sample::Index>()) {
        let root = g.ids()[pick.index(g.n())];
        let run = deterministic_bfs(&g, root).unwrap();
        prop_assert_eq!(&run.tree().layer, &oracle_layers(&g, root));
        prop_assert!(run.tree().verify(&g).is_ok());
    }

    #[test]
    fn flooding_is_exact_and_costs_two_per_edge((g, _) in graph(80)) {
        let root = *g.ids().last().unwrap();
        let run = flood_baseline_bfs(&g, root).unwrap();
        prop_assert_eq!(&run.tree.layer, &oracle_layers(&g, root));
        prop_assert_eq!(run.metrics.messages_total, 2 * g.m() as u64);
    }

    #[test]
    fn deterministic_election_picks_the_max((g, _) in graph(80)) {
        let run = deterministic_leader_election(&g).unwrap();
        prop_assert_eq!(run.leader(), g.ids().iter().copied().max());
    }

    #[test]
    fn randomized_election_agrees((g, seed) in graph(40)) {
        let run = randomized_leader_election(&g, &ElectionOptions { seed, ..ElectionOptions::default() }).unwrap();
        if run.succeeded() {
            prop_assert_eq!(run.result.leader, run.result.candidates.last().copied());
            prop_assert!(run.outputs.values().all(|&o| o == run.result.leader));
        }
    }

    #[test]
    fn mst_routes_agree((g, _) in graph(50)) {
        let run = global_pipeline(&g, GlobalProblem::Mst).unwrap().run;
        let prim = prim(&g);
        prop_assert_eq!(&run.solution, &prim);
        prop_assert_eq!(canonical_mst(&g.edges().collect()), prim);
        let n1 = g.n() as u64 - 1;
        prop_assert!(run.convergecast_messages <= n1 && run.broadcast_messages <= n1);
    }
}
