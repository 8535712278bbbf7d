use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use negsound::generators::{gen_from_cnf, gen_random, gen_structured, Cnf3, RandomParams};
use negsound::oracle::oracle_sound;
use negsound::par;
use negsound::patterns::det_soundness;
use negsound::weak::weak_soundness;
use negsound::{Negotiation, DEFAULT_BUDGET};

fn det_corpus(count: u64) -> Vec<Negotiation> {
    (0..count).filter_map(|s| gen_random(&RandomParams::det_acyclic(10, 4), s).ok()).collect()
}

fn weak_corpus(count: u64) -> Vec<Negotiation> {
    let p = RandomParams { nodes: 10, procs: 4, max_results: 2, acyclic: true, deterministic: false, weakly_nd: true };
    (0..count).filter_map(|s| gen_random(&p, s).ok()).collect()
}

fn det_soundness_scaling(c: &mut Criterion) {
    let mut group = c.benchmark_group("det_soundness");
    group.sample_size(10);
    for nodes in [1_000, 10_000] {
        let neg = gen_structured(nodes, 100, 7);
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &neg, |b, neg| {
            b.iter(|| det_soundness(black_box(neg)).unwrap())
        });
    }
    group.finish();
}

fn oracle_gadget(c: &mut Criterion) {
    let f = Cnf3::new(2, vec![[1, 2, 2], [-1, -2, -2]]).unwrap();
    let neg = gen_from_cnf(&f).unwrap();
    c.bench_function("oracle_sound/sat_gadget", |b| b.iter(|| oracle_sound(black_box(&neg), DEFAULT_BUDGET).unwrap()));
}

/// The same batch on the default pool, on a one-thread pool and as a plain
/// sequential loop.
fn parallel_vs_sequential(c: &mut Criterion) {
    let det = det_corpus(256);
    let weak = weak_corpus(128);
    let mut group = c.benchmark_group("batch");
    group.sample_size(10);
    group.bench_function("det_soundness/sequential", |b| {
        b.iter(|| det.iter().map(|n| det_soundness(n).unwrap().is_sound()).collect::<Vec<_>>())
    });
    group.bench_function("det_soundness/one_thread", |b| {
        b.iter(|| par::with_threads(1, || par::map(&det, |n| det_soundness(n).unwrap().is_sound())))
    });
    group.bench_function("det_soundness/parallel", |b| b.iter(|| par::map(&det, |n| det_soundness(n).unwrap().is_sound())));
    group.bench_function("weak_soundness/one_thread", |b| {
        b.iter(|| par::with_threads(1, || par::map(&weak, |n| weak_soundness(n).unwrap().is_sound())))
    });
    group.bench_function("weak_soundness/parallel", |b| b.iter(|| par::map(&weak, |n| weak_soundness(n).unwrap().is_sound())));
    group.finish();
}

criterion_group!(benches, det_soundness_scaling, oracle_gadget, parallel_vs_sequential);
criterion_main!(benches);
