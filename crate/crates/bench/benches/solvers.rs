use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use crosspoint_bench::engine;
use crosspoint_core::linalg::factorize;
use crosspoint_core::osm::Method;
use crosspoint_core::{split_flow, FlowGraph};
use std::hint::black_box;

fn subdomain_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("subdomain");
    for grid in [10, 20, 40] {
        let e = engine(grid, (2, 2), Method::Auxiliary).unwrap();
        let sys = &e.systems[0];
        let m = sys.a.add(&sys.b);
        g.bench_with_input(BenchmarkId::new("factorize", grid), &m, |b, m| b.iter(|| factorize(black_box(m)).unwrap()));
        let rhs = vec![1.0; sys.len()];
        g.bench_with_input(BenchmarkId::new("solve", grid), &rhs, |b, r| b.iter(|| sys.solve(black_box(r)).unwrap()));
    }
    g.finish();
}

fn osm_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    for method in [Method::Auxiliary, Method::Complete] {
        for grid in [10, 20] {
            let e = engine(grid, (3, 3), method).unwrap();
            let t = e.random_traces(1);
            g.bench_function(BenchmarkId::new(method.to_string(), grid), |b| b.iter(|| e.step(black_box(&t)).unwrap()));
        }
    }
    g.finish();
}

fn graph_split(c: &mut Criterion) {
    let n = 12;
    let edges: Vec<(usize, usize)> =
        (0..n).map(|i| (i, (i + 1) % n)).chain((0..n / 2).map(|i| (i, i + n / 2))).collect();
    let phi: Vec<f64> = (0..n).map(|i| i as f64 - (n - 1) as f64 / 2.0).collect();
    let fg = FlowGraph::new(n, &edges, phi).unwrap();
    c.bench_function("split_flow", |b| b.iter(|| split_flow(black_box(&fg)).unwrap()));
}

criterion_group!(benches, subdomain_solve, osm_step, graph_split);
criterion_main!(benches);
