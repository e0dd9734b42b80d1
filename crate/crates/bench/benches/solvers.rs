use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use peershare_bench::{context, small_sweep};
use peershare_core::cooperation::{group_profit, solve_stackelberg, DiscountPair, StackelbergSettings};
use peershare_core::sweep::sweep_profiles;
use peershare_core::{solve_state0, solve_state1, solve_state2, FunctionFamily, MarketParameters};

fn baseline(c: &mut Criterion) {
    let p = MarketParameters::reference();
    let f = FunctionFamily::reference(p.b_isp);
    c.bench_function("state0", |b| b.iter(|| solve_state0(black_box(&p), &f).unwrap()));
}

fn states(c: &mut Criterion) {
    let ctx = context(0.6, 0.3);
    c.bench_function("state1", |b| b.iter(|| solve_state1(black_box(&ctx)).unwrap()));
    c.bench_function("state2", |b| b.iter(|| solve_state2(black_box(&ctx)).unwrap()));
}

fn cooperation(c: &mut Criterion) {
    let ctx = context(0.6, 0.3);
    let d = DiscountPair::new(0.0, 0.3443).unwrap();
    c.bench_function("group_profit", |b| b.iter(|| group_profit(black_box(&ctx), d).unwrap()));
    let mut g = c.benchmark_group("stackelberg");
    g.sample_size(10);
    g.bench_function("default", |b| {
        b.iter(|| solve_stackelberg(black_box(&ctx), StackelbergSettings::default()).unwrap())
    });
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let s = small_sweep(3);
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("3x3", |b| b.iter(|| sweep_profiles(black_box(&s))));
    g.finish();
}

criterion_group!(benches, baseline, states, cooperation, sweep);
criterion_main!(benches);
