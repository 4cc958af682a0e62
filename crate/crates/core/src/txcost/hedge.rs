//! Superhedging strategies for both sides of a game option under
//! transaction costs, constructed from the backward-recursion tables, plus
//! the exhaustive sweep that certifies them.

use super::{payoff_functions, FrictionMarket, PricingTables, TxPayoff};
use crate::dynkin::StoppingRule;
use crate::error::{Error, Result};
use crate::pl::{self, PiecewiseLinear};
use crate::tree::{Adapted, NodeId};

/// Which side of the contract a strategy protects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Seller,
    Buyer,
}

/// A predictable portfolio path: positions held at each node (chosen at
/// the parent, so siblings carry equal positions).
#[derive(Clone, Debug)]
pub struct PortfolioSeq {
    pub cash: Adapted,
    pub shares: Adapted,
}

/// Find the cheapest-cash successor on `epi(target)` reachable from
/// `(cash, shares)` under the node's transfer kernel: minimize
/// `target(b)` subject to `target(b) + h(shares - b) <= cash`, scanning
/// the breakpoints of the target, the kernel kink, and the feasibility
/// boundary; ties prefer the smallest share magnitude.
fn cheapest_successor(
    target: &PiecewiseLinear,
    kernel: &PiecewiseLinear,
    cash: f64,
    shares: f64,
    slack: f64,
) -> Result<(f64, f64)> {
    let target_fn = target
        .as_finite()
        .ok_or_else(|| Error::IllPosed("successor target is the bottom element".into()))?;
    // D(b) = target(b) + h(shares - b)
    let transfer_cost = kernel.reflect().shift_arg(shares);
    let budget = pl::add(target, &transfer_cost);
    let budget_fn = budget
        .as_finite()
        .expect("sum of finite functions is finite");

    let mut candidates: Vec<f64> = Vec::new();
    candidates.extend_from_slice(target_fn.breakpoints());
    candidates.extend_from_slice(budget_fn.breakpoints());
    candidates.push(0.0);
    candidates.push(shares);
    // feasibility boundary: crossings of D with the cash level
    let bx = budget_fn.breakpoints();
    let bs = budget_fn.slopes();
    for i in 0..=bx.len() {
        let (lo, hi) = (
            if i == 0 { f64::NEG_INFINITY } else { bx[i - 1] },
            if i == bx.len() { f64::INFINITY } else { bx[i] },
        );
        let slope = bs[i];
        if slope.abs() < 1e-300 {
            continue;
        }
        let anchor = if i == 0 { bx[0] } else { bx[i - 1] };
        let cross = anchor + (cash - budget_fn.eval(anchor)) / slope;
        if cross.is_finite() && cross >= lo && cross <= hi {
            candidates.push(cross);
        }
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * a.abs().max(1.0));

    let mut best: Option<(f64, f64)> = None;
    for &b in &candidates {
        if budget.eval(b) > cash + slack {
            continue;
        }
        let v = target.eval(b);
        best = match best {
            None => Some((v, b)),
            Some((bv, bb)) => {
                let tol = slack.max(1e-12 * bv.abs().max(1.0));
                if v < bv - tol || ((v - bv).abs() <= tol && b.abs() < bb.abs()) {
                    Some((v, b))
                } else {
                    Some((bv, bb))
                }
            }
        };
    }
    let (value, b) = best.ok_or_else(|| {
        Error::IllPosed("no reachable successor on the target epigraph".into())
    })?;
    Ok((value, b))
}

fn construct(
    market: &FrictionMarket,
    payoff: &TxPayoff,
    tables: &PricingTables,
    side: Side,
) -> Result<(StoppingRule, PortfolioSeq)> {
    let n = market.depth();
    let scale = payoff.scale(market);
    let slack = 1e-9 * scale;
    let mut cash = Adapted::constant(n, 0.0);
    let mut shares = Adapted::constant(n, 0.0);
    let mut flags = Adapted::constant(n, false);
    let mut frozen = Adapted::constant(n, false);
    let start_cash = match side {
        Side::Seller => tables.value,
        Side::Buyer => -tables.value,
    };
    cash.set(NodeId::ROOT, start_cash);

    let settle_curve = |node: NodeId| -> Result<PiecewiseLinear> {
        let fns = payoff_functions(market, payoff, node)?;
        Ok(match side {
            Side::Seller => fns.qa,
            Side::Buyer => fns.rb,
        })
    };

    // root stop flag
    {
        let curve = settle_curve(NodeId::ROOT)?;
        if start_cash >= curve.eval(0.0) - slack {
            flags.set(NodeId::ROOT, true);
        }
    }
    for t in 0..n {
        for idx in 0..1usize << t {
            let node = NodeId { t, idx };
            let a = *cash.get(node);
            let b = *shares.get(node);
            let stopped = *frozen.get(node) || *flags.get(node);
            let (a_next, b_next) = if stopped {
                (a, b)
            } else {
                let kernel = pl::h_kernel(*market.bid.get(node), *market.ask.get(node))?;
                let target = tables.children_max.get(node);
                cheapest_successor(target, &kernel, a, b, slack)?
            };
            for child in [node.up(), node.down()] {
                cash.set(child, a_next);
                shares.set(child, b_next);
                frozen.set(child, stopped);
                if !stopped {
                    let curve = settle_curve(child)?;
                    if a_next >= curve.eval(b_next) - slack {
                        flags.set(child, true);
                    }
                }
            }
        }
    }
    // every path settles by maturity: at terminal nodes the curve equals
    // the settle leg, which the construction dominates
    for idx in 0..1usize << n {
        let node = NodeId { t: n, idx };
        if !*frozen.get(node) {
            flags.set(node, true);
        }
    }
    Ok((
        StoppingRule::new(flags).canonical(),
        PortfolioSeq { cash, shares },
    ))
}

/// Seller's superhedge from the seller tables with initial portfolio
/// `(V^a, 0)`.
pub fn seller_superhedge(
    market: &FrictionMarket,
    payoff: &TxPayoff,
    tables: &PricingTables,
) -> Result<(StoppingRule, PortfolioSeq)> {
    construct(market, payoff, tables, Side::Seller)
}

/// Buyer's superhedge from the buyer tables with initial portfolio
/// `(-V^b, 0)`.
pub fn buyer_superhedge(
    market: &FrictionMarket,
    payoff: &TxPayoff,
    tables: &PricingTables,
) -> Result<(StoppingRule, PortfolioSeq)> {
    construct(market, payoff, tables, Side::Buyer)
}

/// Exhaustive sweep of the superhedging conditions: the worst liquidation
/// deficit over all paths and opponent exercise times (positive means the
/// strategy fails somewhere).
pub fn verify_superhedge(
    side: Side,
    market: &FrictionMarket,
    payoff: &TxPayoff,
    stop: &StoppingRule,
    portfolio: &PortfolioSeq,
) -> f64 {
    let n = market.depth();
    let mut worst = f64::NEG_INFINITY;
    for (terminal, _) in market.tree.paths() {
        let own = stop.stop_time(terminal);
        for other in 0..=n {
            let m = own.min(other);
            let node = terminal.ancestor(m);
            let (s, t) = match side {
                Side::Seller => (own, other),
                Side::Buyer => (other, own),
            };
            let (pay_cash, pay_shares) = payoff.settlement(terminal, s, t);
            let liq = match side {
                Side::Seller => market.liquidation(
                    node,
                    portfolio.cash.get(node) - pay_cash,
                    portfolio.shares.get(node) - pay_shares,
                ),
                Side::Buyer => market.liquidation(
                    node,
                    portfolio.cash.get(node) + pay_cash,
                    portfolio.shares.get(node) + pay_shares,
                ),
            };
            worst = worst.max(-liq);
        }
    }
    worst.max(0.0)
}

/// Minimality evidence: search every discretized seller strategy (all
/// cancellation rules, all share-position tables from the per-node
/// candidate lists, cash kept maximal under self-financing) started from
/// `capital`, and return the smallest worst-case violation found.  A
/// strictly positive result means no discretized strategy superhedges
/// from that capital.
pub fn grid_superhedge_violation(
    market: &FrictionMarket,
    payoff: &TxPayoff,
    capital: f64,
    share_candidates: &Adapted<Vec<f64>>,
    max_depth: usize,
) -> Result<f64> {
    let n = market.depth();
    if n > max_depth {
        return Err(Error::EnumerationTooLarge {
            size: n as u128,
            bound: max_depth as u128,
        });
    }
    let sigmas = crate::dynkin::enumerate_rules(n, max_depth)?;
    let mut best = f64::INFINITY;
    let mut cash = Adapted::constant(n, 0.0);
    let mut shares = Adapted::constant(n, 0.0);
    cash.set(NodeId::ROOT, capital);

    for sigma in &sigmas {
        // trading nodes: strict ancestors of the cancellation antichain
        let mut trading: Vec<NodeId> = Vec::new();
        fn collect(sigma: &StoppingRule, node: NodeId, n: usize, out: &mut Vec<NodeId>) {
            if node.t == n || sigma.flag(node) {
                return;
            }
            out.push(node);
            collect(sigma, node.up(), n, out);
            collect(sigma, node.down(), n, out);
        }
        collect(sigma, NodeId::ROOT, n, &mut trading);

        // The sweep only reads positions at depths <= the cancellation
        // time, so stale entries below the antichain are harmless.
        #[allow(clippy::too_many_arguments)]
        fn rec(
            market: &FrictionMarket,
            payoff: &TxPayoff,
            sigma: &StoppingRule,
            trading: &[NodeId],
            i: usize,
            cash: &mut Adapted,
            shares: &mut Adapted,
            candidates: &Adapted<Vec<f64>>,
            best: &mut f64,
        ) {
            if i == trading.len() {
                let pf = PortfolioSeq {
                    cash: cash.clone(),
                    shares: shares.clone(),
                };
                let v = verify_superhedge(Side::Seller, market, payoff, sigma, &pf);
                if v < *best {
                    *best = v;
                }
                return;
            }
            let node = trading[i];
            let a = *cash.get(node);
            let b = *shares.get(node);
            let (bid, ask) = (*market.bid.get(node), *market.ask.get(node));
            for &b_next in candidates.get(node) {
                // maximal cash under self-financing
                let d = b - b_next;
                let h = ask * (-d).max(0.0) - bid * d.max(0.0);
                let a_next = a - h;
                for child in [node.up(), node.down()] {
                    cash.set(child, a_next);
                    shares.set(child, b_next);
                }
                rec(
                    market, payoff, sigma, trading, i + 1, cash, shares, candidates, best,
                );
            }
        }
        rec(
            market,
            payoff,
            sigma,
            &trading,
            0,
            &mut cash,
            &mut shares,
            share_candidates,
            &mut best,
        );
    }
    Ok(best)
}
