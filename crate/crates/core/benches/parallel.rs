//! Sequential versus data-parallel execution of the oracle and harness
//! hot paths. Build with `--no-default-features` to compare against a
//! binary with no thread pool at all.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use kt1sim::bfscover::cover_kappa;
use kt1sim::covers::{cover_construction, verify_cover_with, CoverParams};
use kt1sim::exec::ExecMode;
use kt1sim::gossipspanner::haeupler_local_broadcast;
use kt1sim::harness::{scaling_study, spec_for, Algo, FamilySpec};
use kt1sim::netgraph::{diameter_with, generate_graph, GraphFamily};

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn oracles(c: &mut Criterion) {
    let g = generate_graph(&spec_for(FamilySpec::MatchedErdosRenyi, 1024, 1)).unwrap();
    let cover = cover_construction(&g, &CoverParams::new(cover_kappa(g.n()), 2, 1)).unwrap().cover;
    let spanner = haeupler_local_broadcast(&g).unwrap().spanner;

    let mut group = c.benchmark_group("oracles");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new("diameter", name), &mode, |b, &m| {
            b.iter(|| diameter_with(black_box(&g), m))
        });
        group.bench_with_input(BenchmarkId::new("verify_cover", name), &mode, |b, &m| {
            b.iter(|| verify_cover_with(black_box(&cover), &g, m))
        });
        group.bench_with_input(BenchmarkId::new("max_stretch", name), &mode, |b, &m| {
            b.iter(|| spanner.max_stretch(black_box(&g), m).unwrap())
        });
    }
    group.finish();
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new("spanner_bfs_sweep", name), &mode, |b, &m| {
            b.iter(|| {
                scaling_study(
                    FamilySpec::Fixed(GraphFamily::Grid),
                    Algo::BfsSpanner,
                    &[64, 256],
                    &[1, 2, 3, 4],
                    m,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, oracles, trials);
criterion_main!(benches);
