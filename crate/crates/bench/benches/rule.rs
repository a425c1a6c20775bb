use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vetocore::minority::minority_protection;
use vetocore::veto::{enumerate_possible_winners, WinnerBudget};
use vetocore::veto_core::compute_core_set;
use vetocore::CandidateId;
use vetocore_bench::{bloc_election, random_election};

fn bench_core_set(c: &mut Criterion) {
    let bloc = bloc_election();
    c.bench_function("core_set/bloc_12x3_all_k", |b| {
        b.iter(|| {
            for k in 1..=3 {
                black_box(compute_core_set(&bloc, k).unwrap());
            }
        })
    });

    let random = random_election(6, 4, 11);
    c.bench_function("core_set/random_6x4_k2", |b| {
        b.iter(|| black_box(compute_core_set(&random, 2).unwrap()))
    });
}

fn bench_enumeration(c: &mut Criterion) {
    let e = random_election(5, 3, 7);
    let budget = WinnerBudget::Exhaustive { order_cap: None };
    c.bench_function("winners/enumerate_5x3_k1", |b| {
        b.iter(|| black_box(enumerate_possible_winners(&e, 1, &budget).unwrap()))
    });
}

fn bench_protection(c: &mut Criterion) {
    let bloc = bloc_election();
    c.bench_function("protection/bloc_12x3", |b| {
        b.iter(|| {
            for i in 0..3 {
                black_box(minority_protection(&bloc, CandidateId(i)).unwrap());
            }
        })
    });
}

criterion_group!(benches, bench_core_set, bench_enumeration, bench_protection);
criterion_main!(benches);
