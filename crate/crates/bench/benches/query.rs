use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use trapp_bench::Fixture;
use trapp_core::bench::{build_strategy_index, StrategySpec};
use trapp_core::oracle::Dijkstra;
use trapp_core::query::Planner;

fn queries(c: &mut Criterion) {
    let fx = Fixture::new(10_000);
    let sc = &fx.scenario;
    let qs = &sc.queries.queries;
    let mut g = c.benchmark_group("query");

    let trapp = Planner::new(&sc.net, &sc.decomp, &fx.trapp).unwrap();
    let mut ws = trapp.workspace();
    g.bench_function("trapp", |b| {
        b.iter(|| {
            for q in qs {
                black_box(trapp.plan_with(&mut ws, q.s, q.d, &q.vehicle).unwrap());
            }
        })
    });

    let all = Planner::new(&sc.net, &sc.decomp, &fx.all).unwrap();
    let mut ws = all.workspace();
    g.bench_function("all", |b| {
        b.iter(|| {
            for q in qs {
                black_box(all.plan_with(&mut ws, q.s, q.d, &q.vehicle).unwrap());
            }
        })
    });

    let mut dij = Dijkstra::new(sc.net.vertex_count() as usize);
    g.bench_function("oracle", |b| {
        b.iter(|| {
            for q in qs {
                black_box(dij.shortest_path(&sc.net, q.s, q.d, &q.vehicle).unwrap());
            }
        })
    });
    g.finish();
}

/// Presorted first-feasible matching against a scan of every entry, over
/// all shortcuts of the All index.
fn matching(c: &mut Criterion) {
    let fx = Fixture::new(5_000);
    let shortcuts: Vec<_> = fx.all.cells().iter().flat_map(|c| c.shortcuts()).collect();
    let vehicles: Vec<_> = fx
        .scenario
        .traffic
        .vehicles
        .iter()
        .step_by(97)
        .copied()
        .collect();
    let mut g = c.benchmark_group("match");
    g.bench_function("presorted", |b| {
        b.iter(|| {
            for s in &shortcuts {
                for v in &vehicles {
                    black_box(s.find_match(v));
                }
            }
        })
    });
    g.bench_function("full_scan", |b| {
        b.iter(|| {
            for s in &shortcuts {
                for v in &vehicles {
                    black_box(s.full_scan(v));
                }
            }
        })
    });
    g.finish();
}

fn build(c: &mut Criterion) {
    let fx = Fixture::new(5_000);
    let mut g = c.benchmark_group("build");
    g.sample_size(10);
    for spec in [StrategySpec::Trapp, StrategySpec::All] {
        g.bench_function(spec.label(), |b| {
            b.iter(|| build_strategy_index(&fx.scenario, &fx.cfg, &spec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, queries, matching, build);
criterion_main!(benches);
