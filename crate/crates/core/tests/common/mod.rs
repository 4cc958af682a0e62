//! Shared generators and independent oracles for the integration tests.
//! Oracles deliberately avoid the library's solver code paths.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gamehedge::dynkin::DynkinInstance;
use gamehedge::tree::{Adapted, CrrParams, EventTree, NodeId};
use gamehedge::txcost::{FrictionMarket, TxPayoff};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random game-type Dynkin instance (diagonal equal to the lower leg).
pub fn random_dynkin(rng: &mut ChaCha8Rng, max_depth: usize) -> DynkinInstance {
    let depth = rng.random_range(1..=max_depth);
    let tree = EventTree::new(
        depth,
        (0..depth)
            .map(|t| (0..1usize << t).map(|_| rng.random_range(0.1..0.9)).collect())
            .collect(),
    )
    .unwrap();
    let lower = Adapted::from_fn(depth, |_| rng.random_range(0.0..1.0));
    let upper = Adapted::from_fn(depth, |node| {
        if node.t == depth {
            *lower.get(node)
        } else {
            lower.get(node) + rng.random_range(0.0..1.0)
        }
    });
    DynkinInstance::with_diagonal_lower(tree, upper, lower).unwrap()
}

/// Random CRR parameters in a comfortable no-arbitrage strip.
pub fn random_crr(rng: &mut ChaCha8Rng, steps: usize) -> CrrParams {
    let up = rng.random_range(0.08..0.35);
    let down = -rng.random_range(0.08..0.3);
    let rate = rng.random_range((down * 0.5)..(up * 0.5));
    let s0 = rng.random_range(0.5..2.0);
    CrrParams::new(s0, up, down, rate, steps).unwrap()
}

/// American (buyer-only) value of the discounted payoff by an independent
/// Snell recursion.
pub fn snell_value(tree: &EventTree, discounted_lower: &Adapted) -> f64 {
    let n = tree.depth();
    let mut values = discounted_lower.clone();
    for t in (0..n).rev() {
        for idx in 0..1usize << t {
            let node = NodeId { t, idx };
            let cont = tree.expect_children(&values, node);
            let v = discounted_lower.get(node).max(cont);
            values.set(node, v);
        }
    }
    *values.get(NodeId::ROOT)
}

/// Random friction market on a CRR-shaped tree with proportional spreads.
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
    FrictionMarket::new(tree, ask, bid).unwrap()
}

/// Random mixed cash/share payoff packages with nonnegative cancellation
/// penalty and terminal equality.
pub fn random_tx_payoff(rng: &mut ChaCha8Rng, market: &FrictionMarket) -> TxPayoff {
    let n = market.depth();
    let y_cash = Adapted::from_fn(n, |_| rng.random_range(-0.5..1.5));
    let y_shares = Adapted::from_fn(n, |_| rng.random_range(-0.4..0.6));
    // penalty package with nonnegative liquidation: nonneg cash and shares
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
    TxPayoff::new(market, x_cash, x_shares, y_cash, y_shares).unwrap()
}
