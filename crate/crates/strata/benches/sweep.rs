//! Compares the rayon-parallel pairing sweep and formula expansion against
//! their single-threaded equivalents.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use strata::algebra::Space;
use strata::hyperelliptic::{formula_graph_part, hyp_recursive, hyp_tilde_formula};
use strata::integrals::{complementary_generators, pair_class_against_terms_with};
use strata::par::{map_collect_par, map_collect_seq};

fn bench_formula_expansion(c: &mut Criterion) {
    let n = 2u32;
    let space = Space::new(2, n);
    let graphs = strata::graphs::enumerate_stable_graphs(
        2,
        &space.marks,
        strata::graphs::GraphFilter::Extended,
    );
    // warm the shared caches so both variants measure the same work
    let _ = hyp_tilde_formula(n, false);
    let mut group = c.benchmark_group("formula_expansion_n2");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let parts = map_collect_seq(graphs.clone(), |g| formula_graph_part(&space, &g, n));
            black_box(parts.len())
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let parts = map_collect_par(graphs.clone(), |g| formula_graph_part(&space, &g, n));
            black_box(parts.len())
        })
    });
    group.finish();
}

fn bench_pairing_sweep(c: &mut Criterion) {
    let n = 2u32;
    let space = Space::new(2, n);
    let cls = hyp_recursive(n);
    let gens = complementary_generators(&space, space.dim() - n as i64);
    let mut group = c.benchmark_group("pairing_sweep_n2");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let vals = pair_class_against_terms_with(&cls, &gens, false);
            black_box(vals.len())
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let vals = pair_class_against_terms_with(&cls, &gens, true);
            black_box(vals.len())
        })
    });
    group.finish();
}

criterion_group!(benches, bench_formula_expansion, bench_pairing_sweep);
criterion_main!(benches);
