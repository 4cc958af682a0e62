//! Seeded random instance generators for the self-test battery.  Ranges
//! keep the instances numerically comfortable (probabilities away from
//! the boundary, payoffs of unit scale, moderate spreads).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gamehedge::dynkin::DynkinInstance;
use gamehedge::game_option::GameOptionInstance;
use gamehedge::swing::{ClaimPayoffs, SwingSpec};
use gamehedge::tree::{Adapted, CrrParams, EventTree};
use gamehedge::txcost::{FrictionMarket, TxPayoff};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random game-convention Dynkin instance (diagonal equals the lower
/// leg): node-wise probabilities in (0.1, 0.9), payoffs of unit scale.
pub fn random_dynkin(rng: &mut ChaCha8Rng, max_depth: usize) -> DynkinInstance {
    let depth = rng.random_range(1..=max_depth);
    let tree = EventTree::new(
        depth,
        (0..depth)
            .map(|t| (0..1usize << t).map(|_| rng.random_range(0.1..0.9)).collect())
            .collect(),
    )
    .expect("generated probabilities are interior");
    let lower = Adapted::from_fn(depth, |_| rng.random_range(0.0..1.0));
    let upper = lower.map(|node, y| {
        if node.t == depth {
            *y
        } else {
            y + rng.random_range(0.0..1.0)
        }
    });
    DynkinInstance::with_diagonal_lower(tree, upper, lower).expect("ordering holds by construction")
}

/// Random CRR parameters inside a comfortable no-arbitrage strip.
pub fn random_crr(rng: &mut ChaCha8Rng, steps: usize) -> CrrParams {
    let up = rng.random_range(0.08..0.35);
    let down = -rng.random_range(0.08..0.3);
    let rate = rng.random_range((down * 0.5)..(up * 0.5));
    let s0 = rng.random_range(0.5..2.0);
    CrrParams::new(s0, up, down, rate, steps).expect("strip is valid by construction")
}

/// Random game-option instance with adapted payoffs and the given
/// penalty profile (`None` draws a random bounded penalty).
pub fn random_game_instance(
    rng: &mut ChaCha8Rng,
    steps: usize,
    penalty: Option<f64>,
) -> GameOptionInstance {
    let params = random_crr(rng, steps);
    let lower = Adapted::from_fn(steps, |_| rng.random_range(0.0..1.0));
    let upper = lower.map(|node, y| {
        if node.t == steps {
            *y
        } else {
            y + penalty.unwrap_or_else(|| rng.random_range(0.0..0.4))
        }
    });
    GameOptionInstance::from_parts(params, upper, lower, 1.0).expect("ordering by construction")
}

/// Random swing specification in discounted units (martingale stock).
pub fn random_swing(rng: &mut ChaCha8Rng, depth: usize, claims: usize) -> SwingSpec {
    let up = rng.random_range(0.1..0.3);
    let down = -rng.random_range(0.1..0.3);
    let params = CrrParams::new(rng.random_range(0.5..2.0), up, down, 0.0, depth)
        .expect("zero-rate strip");
    let tree = params.event_tree();
    let stock = params.price_process();
    let claims = (0..claims)
        .map(|_| {
            let lower = Adapted::from_fn(depth, |_| rng.random_range(0.0..1.0));
            let upper = lower.map(|node, y| {
                if node.t == depth {
                    *y
                } else {
                    y + rng.random_range(0.0..0.6)
                }
            });
            ClaimPayoffs { upper, lower }
        })
        .collect();
    SwingSpec::new(tree, stock, claims).expect("claim ordering by construction")
}

/// Random friction market around a CRR mid-price with a proportional
/// spread in `[0, max_spread]`.
pub fn random_friction_market(
    rng: &mut ChaCha8Rng,
    depth: usize,
    max_spread: f64,
) -> FrictionMarket {
    let params = random_crr(rng, depth);
    let mid = params.price_process();
    let tree = params.event_tree();
    let spread = rng.random_range(0.0..max_spread);
    let ask = mid.map(|_, s| s * (1.0 + spread));
    let bid = mid.map(|_, s| s * (1.0 - spread));
    FrictionMarket::new(tree, ask, bid).expect("spread ordering by construction")
}

/// Random mixed cash/share payoff packages with nonnegative cancellation
/// penalty and terminal equality.
pub fn random_tx_payoff(rng: &mut ChaCha8Rng, market: &FrictionMarket) -> TxPayoff {
    let n = market.depth();
    let y_cash = Adapted::from_fn(n, |_| rng.random_range(-0.5..1.5));
    let y_shares = Adapted::from_fn(n, |_| rng.random_range(-0.4..0.6));
    let x_cash = Adapted::from_fn(n, |node| {
        if node.t == n {
            *y_cash.get(node)
        } else {
            y_cash.get(node) + rng.random_range(0.0..0.8)
        }
    });
    let x_shares = Adapted::from_fn(n, |node| {
        if node.t == n {
            *y_shares.get(node)
        } else {
            y_shares.get(node) + rng.random_range(0.0..0.3)
        }
    });
    TxPayoff::new(market, x_cash, x_shares, y_cash, y_shares)
        .expect("penalty is a nonnegative package by construction")
}

/// Zero-spread cash-settled instance matching a frictionless game option.
pub fn zero_spread_instance(
    rng: &mut ChaCha8Rng,
    steps: usize,
) -> (GameOptionInstance, FrictionMarket, TxPayoff) {
    let inst = random_game_instance(rng, steps, None);
    let disc_stock = inst
        .prices
        .map(|node, s| inst.params.discount(node.t) * s);
    let (upper, lower) = inst.discounted();
    let market = FrictionMarket::new(inst.tree.clone(), disc_stock.clone(), disc_stock)
        .expect("zero spread is a valid band");
    let payoff = TxPayoff::cash_settled(&market, upper, lower).expect("cash packages");
    (inst, market, payoff)
}
