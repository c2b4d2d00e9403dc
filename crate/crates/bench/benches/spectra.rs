use bsr_bench::{default_problem, ladder, scaled_harmonic};
use bsr_core::analysis::pair_spectra;
use bsr_core::eigensolve::{eig_complex_dense, eig_sym_tridiag_window, BlockTridiag2};
use bsr_core::model::Channel;
use bsr_core::reduction::{Grushin, ProjectionBasis};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn windowed(c: &mut Criterion) {
    let p = default_problem();
    let cp = p.layout.critical.clone();
    let mut g = c.benchmark_group("dirichlet_window");
    for h in [0.02, 0.01] {
        let lv = p.level(h).unwrap();
        let p1 = lv.channel(Channel::One, false, true).unwrap();
        g.bench_with_input(BenchmarkId::new("p1_bisection", h), &p1, |b, op| {
            b.iter(|| eig_sym_tridiag_window(black_box(op), cp.m1, cp.m2, false).unwrap())
        });
        let bt = BlockTridiag2::from_operator(&lv.two_channel(false, true).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::new("two_channel_sturm", h), &bt, |b, bt| {
            b.iter(|| bt.eigenvalues_in(black_box(cp.m1), cp.m2))
        });
    }
    g.finish();
}

fn pairing(c: &mut Criterion) {
    let mut g = c.benchmark_group("pairing");
    for n in [20, 60] {
        let left = ladder(n, 0.01, 1e-4);
        let right = ladder(n + 3, 0.01, 3e-4);
        g.bench_with_input(BenchmarkId::from_parameter(n), &(left, right), |b, (l, r)| {
            b.iter(|| pair_spectra(black_box(l), black_box(r), 0.1).unwrap())
        });
    }
    g.finish();
}

fn dense_scaled(c: &mut Criterion) {
    let mut g = c.benchmark_group("scaled_dense_eig");
    g.sample_size(10);
    for n in [200, 400] {
        let op = scaled_harmonic(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &op, |b, op| {
            b.iter(|| eig_complex_dense(black_box(op), &|_| false).unwrap())
        });
    }
    g.finish();
}

fn grushin(c: &mut Criterion) {
    let p = default_problem();
    let l = &p.layout;
    let lv = p.level(0.04).unwrap();
    let op = lv.two_channel(true, false).unwrap();
    let basis = ProjectionBasis::build(&op, l.critical.m2, l.alpha).unwrap();
    let gr = Grushin::new(&op, &basis, 0.04).unwrap();
    let mut g = c.benchmark_group("grushin");
    g.sample_size(10);
    g.bench_function("q_at_m2", |b| b.iter(|| gr.q(black_box(l.critical.m2)).unwrap()));
    g.finish();
}

criterion_group!(benches, windowed, pairing, dense_scaled, grushin);
criterion_main!(benches);
