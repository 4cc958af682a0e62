//! Benchmarks of the hot kernels: backward induction, the polyhedral
//! recursion, the recombining lattices and the embedding simulation.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use gamehedge::bridge::{self, BsParams, EmbedConfig};
use gamehedge::dynkin::{solve_dp, DynkinInstance};
use gamehedge::payoff::PayoffSpec;
use gamehedge::pl::{gr_transform, pointwise_max, PiecewiseLinear, PlFn};
use gamehedge::tree::{Adapted, EventTree};
use gamehedge::txcost::{self, FrictionMarket, TxPayoff};

fn dynkin_instance(depth: usize) -> DynkinInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tree = EventTree::homogeneous(depth, 0.5).unwrap();
    let lower = Adapted::from_fn(depth, |_| rng.random_range(0.0..1.0));
    let upper = lower.map(|node, y| {
        if node.t == depth {
            *y
        } else {
            y + rng.random_range(0.0..1.0)
        }
    });
    DynkinInstance::with_diagonal_lower(tree, upper, lower).unwrap()
}

fn bench_dynkin(c: &mut Criterion) {
    let inst = dynkin_instance(14);
    c.bench_function("dynkin_solve_dp_depth14", |b| {
        b.iter(|| black_box(solve_dp(black_box(&inst)).unwrap().root()))
    });
}

fn bench_polyhedral(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let fns: Vec<PiecewiseLinear> = (0..64)
        .map(|_| {
            let mut xs: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let vs: Vec<f64> = xs.iter().map(|_| rng.random_range(-4.0..4.0)).collect();
            PiecewiseLinear::Finite(
                PlFn::new(xs, vs, rng.random_range(-3.0..-0.1), rng.random_range(-3.0..-0.1))
                    .unwrap(),
            )
        })
        .collect();
    c.bench_function("gr_transform_chain_64", |b| {
        b.iter(|| {
            let mut acc = fns[0].clone();
            for f in &fns[1..] {
                acc = pointwise_max(&acc, f);
                acc = gr_transform(&acc, 1.0, 2.0).unwrap();
            }
            black_box(acc)
        })
    });
}

fn bench_txcost(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let depth = 9;
    let params = gamehedge::tree::CrrParams::new(10.0, 0.2, -0.2, 0.0, depth).unwrap();
    let mid = params.price_process();
    let market = FrictionMarket::new(
        params.event_tree(),
        mid.map(|_, s| s * 1.02),
        mid.map(|_, s| s * 0.98),
    )
    .unwrap();
    let y_cash = Adapted::from_fn(depth, |_| rng.random_range(0.0..1.0));
    let x_cash = y_cash.map(|node, y| if node.t == depth { *y } else { y + 0.3 });
    let zero = Adapted::constant(depth, 0.0);
    let payoff = TxPayoff::new(&market, x_cash, zero.clone(), y_cash, zero).unwrap();
    c.bench_function("txcost_seller_price_depth9", |b| {
        b.iter(|| black_box(txcost::seller_price(&market, &payoff).unwrap().value))
    });
}

fn bench_lattices(c: &mut Criterion) {
    let bs = BsParams {
        spot: 110.0,
        rate: 0.06,
        vol: 0.5,
        maturity: 0.5,
    };
    let put = PayoffSpec::VanillaPut {
        strike: 100.0,
        penalty: 4.0,
    };
    c.bench_function("put_lattice_n1024", |b| {
        b.iter(|| black_box(bridge::price_lattice(&put, &bs, 1024).unwrap()))
    });
    let russian = PayoffSpec::Russian {
        floor: 110.0,
        pen_rate: 0.5,
    };
    c.bench_function("russian_lattice_n256", |b| {
        b.iter(|| black_box(bridge::price_lattice(&russian, &bs, 256).unwrap()))
    });
}

fn bench_embedding(c: &mut Criterion) {
    let bs = BsParams {
        spot: 110.0,
        rate: 0.06,
        vol: 0.5,
        maturity: 0.5,
    };
    let cfg = EmbedConfig {
        fine_per_step: 128,
        cap_factor: 4.0,
    };
    c.bench_function("embedding_path_n64_m128", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        b.iter(|| black_box(bridge::simulate_embedding(&bs, 64, &cfg, &mut rng)))
    });
}

criterion_group!(
    benches,
    bench_dynkin,
    bench_polyhedral,
    bench_txcost,
    bench_lattices,
    bench_embedding
);
criterion_main!(benches);
