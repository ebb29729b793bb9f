//! Concrete worked examples at sizes too large for unit tests.

use kt1sim::bfscover::{bfs_construction, randomized_leader_election, BfsOptions, ElectionOptions};
use kt1sim::covers::{cover_construction, verify_cover, CoverParams};
use kt1sim::exec::ExecMode;
use kt1sim::gossipspanner::{
    canonical_mst, deterministic_leader_election, global_pipeline, GlobalProblem, DET_ELECTION_CONSTANT,
};
use kt1sim::harness::{scaling_study, spec_for, Algo, FamilySpec};
use kt1sim::netgraph::{generate_graph, log2_ceil, oracle_bfs, Graph, GraphFamily, GraphGenSpec};

#[test]
fn cover_bfs_on_sparse_random_graph() {
    let g = generate_graph(&GraphGenSpec::new(GraphFamily::ErdosRenyi { p: 0.03 }, 512).with_seed(11)).unwrap();
    let root = g.ids()[0];
    let run = bfs_construction(&g, root, &BfsOptions::default()).unwrap();
    assert_eq!(run.tree.layer, oracle_bfs(&g, root).unwrap().dist);
    assert_eq!(run.explore_receipts.len(), g.n());
    for (&v, &k) in &run.explore_receipts {
        assert_eq!(k, u64::from(v != root), "node {v}");
    }
}

#[test]
fn cover_with_logarithmic_kappa() {
    let g = generate_graph(&spec_for(FamilySpec::MatchedErdosRenyi, 512, 3)).unwrap();
    let kappa = log2_ceil(512);
    let run = cover_construction(&g, &CoverParams::new(kappa, 2, 3)).unwrap();
    let report = verify_cover(&run.cover, &g);
    assert!(report.neighborhood_ok, "{:?}", report.uncovered);
    assert!(report.max_depth <= 4 * kappa);
}

#[test]
fn cover_on_grid_respects_depth() {
    let g = generate_graph(&GraphGenSpec::new(GraphFamily::Grid, 256)).unwrap();
    let run = cover_construction(&g, &CoverParams::new(4, 2, 0)).unwrap();
    let report = verify_cover(&run.cover, &g);
    assert!(report.max_depth <= 16);
    assert!(report.neighborhood_ok);
}

#[test]
fn max_candidate_wins_with_sparse_ids() {
    // Ten nodes so ids up to 10³ are admissible.
    let ids = [3, 17, 40, 255, 301, 512, 640, 777, 903, 1000];
    let ring = (0..ids.len()).map(|i| (ids[i], ids[(i + 1) % ids.len()]));
    let g = Graph::from_edges(ids, ring).unwrap();
    let options = ElectionOptions {
        forced_candidates: Some(vec![17, 903]),
        ..ElectionOptions::default()
    };
    let run = randomized_leader_election(&g, &options).unwrap();
    assert!(run.outputs.values().all(|&o| o == Some(903)));
}

#[test]
fn deterministic_election_on_random_graph() {
    let g = generate_graph(&spec_for(FamilySpec::MatchedErdosRenyi, 512, 5)).unwrap();
    let run = deterministic_leader_election(&g).unwrap();
    assert_eq!(run.leader(), g.ids().iter().copied().max());
    let bound = DET_ELECTION_CONSTANT * run.gossip.spanner.size() as f64 * f64::from(log2_ceil(512));
    assert!((run.election.metrics.messages_total as f64) <= bound);
}

#[test]
fn grid_mst_matches_centralized_solution() {
    let g = generate_graph(&spec_for(FamilySpec::Fixed(GraphFamily::Grid), 64, 2)).unwrap();
    let p = global_pipeline(&g, GlobalProblem::Mst).unwrap();
    assert_eq!(p.run.solution, canonical_mst(&g.edges().collect()));
    assert_eq!(p.leader, g.ids().iter().copied().max().unwrap());
}

#[test]
fn spanner_bfs_on_paths_is_linear_in_diameter() {
    let t = scaling_study(
        FamilySpec::Fixed(GraphFamily::Path),
        Algo::BfsSpanner,
        &[64, 128, 256],
        &[1, 2],
        ExecMode::Parallel,
    )
    .unwrap();
    assert!(t.all_passed());
    let per_hop: Vec<f64> = t.rows.iter().map(|r| r.median_rounds / (r.n - 1) as f64).collect();
    for w in per_hop.windows(2) {
        assert!((w[1] / w[0] - 1.0).abs() < 0.25, "{per_hop:?}");
    }
    assert!(t.message_growth().unwrap() <= 2.0);
}

#[test]
fn cover_bfs_on_stars_is_polylogarithmic() {
    let t = scaling_study(
        FamilySpec::Fixed(GraphFamily::Star),
        Algo::BfsCover,
        &[64, 128, 256, 512, 1024],
        &[1],
        ExecMode::Parallel,
    )
    .unwrap();
    assert!(t.all_passed());
    let c: Vec<f64> = t
        .rows
        .iter()
        .map(|r| r.median_rounds / f64::from(log2_ceil(r.n)).powi(3))
        .collect();
    assert!(c.iter().all(|&x| x <= 60.0), "{c:?}");
    assert!(c.last().unwrap() <= c.first().unwrap());
}

#[test]
fn single_size_sweep_has_no_growth() {
    let t = scaling_study(FamilySpec::Fixed(GraphFamily::Cycle), Algo::LeDet, &[32], &[1], ExecMode::Sequential).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.message_growth().is_none());
    assert!(t.within_growth());
}
