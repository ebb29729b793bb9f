//! Graph generator invariants and a second, independent distance oracle.

use std::collections::BTreeSet;

use kt1sim::netgraph::{diameter, generate_graph, oracle_bfs, Graph, GraphFamily, GraphGenSpec, IdScheme};
use proptest::prelude::*;

/// All-pairs hop distances by boolean matrix powers: `A^k` reachability
/// first becomes true at `k = dist`.
fn matrix_power_distances(g: &Graph) -> Vec<Vec<u32>> {
    let n = g.n();
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| g.has_edge(g.id_at(i), g.id_at(j))).collect())
        .collect();
    let mut dist = vec![vec![u32::MAX; n]; n];
    let mut reach: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = 0;
    }
    for k in 1..n as u32 {
        let next: Vec<Vec<bool>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| reach[i][j] || (0..n).any(|x| reach[i][x] && adj[x][j]))
                    .collect()
            })
            .collect();
        if next == reach {
            break;
        }
        for i in 0..n {
            for j in 0..n {
                if next[i][j] && !reach[i][j] {
                    dist[i][j] = k;
                }
            }
        }
        reach = next;
    }
    dist
}

#[test]
fn bfs_matches_matrix_powers_on_random_graph() {
    let spec = GraphGenSpec::new(GraphFamily::ErdosRenyi { p: 0.04 }, 128)
        .with_ids(IdScheme::RandomPermutation)
        .with_seed(21);
    let g = generate_graph(&spec).unwrap();
    let apsp = matrix_power_distances(&g);
    for (i, &root) in g.ids().iter().enumerate().step_by(9) {
        let d = oracle_bfs(&g, root).unwrap();
        for (j, &v) in g.ids().iter().enumerate() {
            assert_eq!(d.get(v), Some(apsp[i][j]), "{root} -> {v}");
        }
    }
    let ecc = apsp.iter().flatten().copied().max().unwrap();
    assert_eq!(diameter(&g), ecc);
}

#[test]
fn fixed_diameters() {
    let d = |f, n| diameter(&generate_graph(&GraphGenSpec::new(f, n)).unwrap());
    assert_eq!(d(GraphFamily::Path, 1), 0);
    assert_eq!(d(GraphFamily::Cycle, 6), 3);
    assert_eq!(d(GraphFamily::Grid, 64), 14);
    assert_eq!(d(GraphFamily::Star, 9), 2);
}

fn family() -> impl Strategy<Value = GraphFamily> {
    prop_oneof![
        Just(GraphFamily::Path),
        Just(GraphFamily::Cycle),
        Just(GraphFamily::Star),
        Just(GraphFamily::Complete),
        Just(GraphFamily::Grid),
        Just(GraphFamily::BalancedBinaryTree),
        (0.15f64..0.6).prop_map(|p| GraphFamily::ErdosRenyi { p }),
    ]
}

prop_compose! {
    fn any_spec()(f in family(), n in 1usize..48, seed in any::<u64>(), random_ids in any::<bool>()) -> GraphGenSpec {
        let ids = if random_ids { IdScheme::RandomPermutation } else { IdScheme::Sequential };
        GraphGenSpec::new(f, n).with_ids(ids).with_seed(seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_graphs_are_well_formed(spec in any_spec()) {
        let g = generate_graph(&spec).unwrap();
        prop_assert_eq!(g.n(), spec.n);
        let ids: BTreeSet<_> = g.ids().iter().copied().collect();
        prop_assert_eq!(ids.len(), g.n());
        let cube = (g.n() as u64).pow(3).max(1);
        prop_assert!(g.ids().iter().all(|&v| (1..=cube.max(g.n() as u64)).contains(&v)));
        for (u, v) in g.edges() {
            prop_assert!(g.has_edge(v, u));
            prop_assert!(u != v);
        }
        let d = oracle_bfs(&g, g.ids()[0]).unwrap();
        prop_assert_eq!(d.dist.len(), g.n());
        prop_assert!(d.is_lipschitz(&g));
        let max_ecc = g.ids().iter().map(|&r| oracle_bfs(&g, r).unwrap().max()).max().unwrap();
        prop_assert_eq!(diameter(&g), max_ecc);
        prop_assert_eq!(generate_graph(&spec).unwrap(), g);
    }
}
