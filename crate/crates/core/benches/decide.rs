//! Sequential versus parallel runs of the outer search loops.
//!
//! `cargo bench -p absorber-core` compares one worker with all available
//! cores; `--no-default-features` builds the sequential fallback, where
//! both variants run on the calling thread.

use std::hint::black_box;

use absorber_core::absorption::find_b_essential;
use absorber_core::blocker::find_blocker_fpt;
use absorber_core::jonsson::decide_jonsson;
use absorber_core::reduction::{build_reduction_algebra, parse_dimacs};
use absorber_core::{Algebra, Budget, Elem, OpFn, Subset};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

/// A fixed pseudo-random idempotent algebra with one binary and one ternary
/// operation.
fn scrambled(n: usize, seed: u64) -> Algebra {
    let mut state = seed;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 33) as Elem
    };
    let mut op = |r: usize| -> Box<OpFn> {
        let table: Vec<Elem> = (0..n.pow(r as u32)).map(|_| next() % n as Elem).collect();
        Box::new(move |x: &[Elem]| {
            if x.iter().all(|&v| v == x[0]) {
                x[0]
            } else {
                table[x.iter().fold(0, |acc, &v| acc * n + v as usize)]
            }
        })
    };
    let (f, g) = (op(2), op(3));
    Algebra::from_fns(n, vec![("f", 2, &*f), ("g", 3, &*g)]).unwrap()
}

fn variants() -> Vec<(&'static str, Budget)> {
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    vec![
        ("sequential", Budget::default()),
        ("parallel", Budget::default().threads(cores.max(2))),
    ]
}

fn jonsson(c: &mut Criterion) {
    let a = scrambled(5, 7);
    let mut g = c.benchmark_group("jonsson");
    for n in [2usize, 3] {
        let sq = scrambled(n, 11).power(2, 1 << 10).unwrap();
        let diag = Subset::new((0..n).map(|x| (x * n + x) as Elem), n * n).unwrap();
        for (name, budget) in variants() {
            g.bench_with_input(
                BenchmarkId::new(name, format!("diagonal n={n}")),
                &budget,
                |bch, b| bch.iter(|| decide_jonsson(black_box(&sq), &diag, b).unwrap()),
            );
        }
    }
    for (name, budget) in variants() {
        g.bench_with_input(BenchmarkId::new(name, "n=5 {0,1}"), &budget, |bch, b| {
            let s = a.generate_subuniverse(&Subset::new([0, 1], 5).unwrap());
            bch.iter(|| decide_jonsson(black_box(&a), &s, b).unwrap())
        });
    }
    g.finish();
}

fn blocker(c: &mut Criterion) {
    // unsatisfiable, so the search runs to completion
    let f = parse_dimacs("p cnf 3 3\n1 0\n-1 2 0\n-2 0\n").unwrap();
    let r = build_reduction_algebra(&f).unwrap();
    let b = Subset::singleton(r.b);
    let mut g = c.benchmark_group("blocker_fpt");
    for (name, budget) in variants() {
        g.bench_with_input(BenchmarkId::new(name, "unsat 3x3"), &budget, |bch, bud| {
            bch.iter(|| find_blocker_fpt(black_box(&r.algebra), &b, bud).unwrap())
        });
    }
    g.finish();
}

fn essential(c: &mut Criterion) {
    let a = scrambled(3, 3);
    let b = Subset::singleton(0);
    let mut g = c.benchmark_group("essential");
    for (name, budget) in variants() {
        g.bench_with_input(BenchmarkId::new(name, "n=3 k=3"), &budget, |bch, bud| {
            bch.iter(|| find_b_essential(black_box(&a), &b, 3, bud).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, jonsson, blocker, essential);
criterion_main!(benches);
