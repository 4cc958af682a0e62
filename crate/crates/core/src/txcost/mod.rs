//! Game options under proportional transaction costs (bid-ask spreads).
//!
//! Payments are packages of cash and stock shares; portfolios are valued
//! by their liquidation value against the current bid/ask.  All prices
//! are discounted: the bond is identically one.  Seller and buyer
//! superhedging prices come from backward recursions over piecewise-linear
//! functions of the share position: settle legs via the two-slope kernel,
//! a pointwise max over children, and the epigraph-sum transform for the
//! self-financing transfer.

mod dual;
mod hedge;

pub use dual::{check_approx_martingale, dual_spotcheck, DualReport, MartingaleCheck};
pub use hedge::{
    buyer_superhedge, grid_superhedge_violation, seller_superhedge, verify_superhedge,
    PortfolioSeq, Side,
};

use crate::error::{Error, Result};
use crate::pl::{self, PiecewiseLinear};
use crate::tree::{Adapted, EventTree, NodeId};

/// A market with bid-ask spreads: `ask >= bid > 0` at every node.
#[derive(Clone, Debug)]
pub struct FrictionMarket {
    pub tree: EventTree,
    pub ask: Adapted,
    pub bid: Adapted,
}

impl FrictionMarket {
    pub fn new(tree: EventTree, ask: Adapted, bid: Adapted) -> Result<Self> {
        let n = tree.depth();
        if ask.depth() != n || bid.depth() != n {
            return Err(Error::ShapeMismatch("price depth mismatch".into()));
        }
        for node in ask.nodes() {
            let (a, b) = (*ask.get(node), *bid.get(node));
            if !(a >= b && b > 0.0) || !a.is_finite() {
                return Err(Error::OrderingViolation {
                    t: node.t,
                    idx: node.idx,
                    what: format!("need ask >= bid > 0, got ask={a}, bid={b}"),
                });
            }
        }
        Ok(FrictionMarket { tree, ask, bid })
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    /// Liquidation value of `(cash, shares)` at a node:
    /// `cash + bid * shares^+ - ask * shares^-`.
    pub fn liquidation(&self, node: NodeId, cash: f64, shares: f64) -> f64 {
        cash + self.bid.get(node) * shares.max(0.0) + self.ask.get(node) * shares.min(0.0)
    }
}

/// Payoff packages of a game option under friction: cash and share legs
/// of the cancellation payment `X` and the exercise payment `Y`.
/// Components may be negative; the cancellation penalty
/// `theta_t(X - Y) >= 0` and terminal equality are enforced.
#[derive(Clone, Debug)]
pub struct TxPayoff {
    pub x_cash: Adapted,
    pub x_shares: Adapted,
    pub y_cash: Adapted,
    pub y_shares: Adapted,
}

impl TxPayoff {
    pub fn new(
        market: &FrictionMarket,
        x_cash: Adapted,
        x_shares: Adapted,
        y_cash: Adapted,
        y_shares: Adapted,
    ) -> Result<Self> {
        let n = market.depth();
        for p in [&x_cash, &x_shares, &y_cash, &y_shares] {
            if p.depth() != n {
                return Err(Error::ShapeMismatch("payoff depth mismatch".into()));
            }
            if !p.is_finite() {
                return Err(Error::InvalidParameter("payoff must be finite".into()));
            }
        }
        let out = TxPayoff {
            x_cash,
            x_shares,
            y_cash,
            y_shares,
        };
        let tol = 1e-12 * out.scale(market);
        for node in out.x_cash.nodes() {
            let penalty = market.liquidation(
                node,
                out.x_cash.get(node) - out.y_cash.get(node),
                out.x_shares.get(node) - out.y_shares.get(node),
            );
            if penalty < -tol {
                return Err(Error::OrderingViolation {
                    t: node.t,
                    idx: node.idx,
                    what: format!("cancellation penalty must be nonnegative, got {penalty}"),
                });
            }
            if node.t == n {
                let dc = (out.x_cash.get(node) - out.y_cash.get(node)).abs();
                let ds = (out.x_shares.get(node) - out.y_shares.get(node)).abs();
                if dc > tol || ds > tol {
                    return Err(Error::TerminalMismatch {
                        t: node.t,
                        idx: node.idx,
                        what: "cancellation and exercise packages must coincide at maturity"
                            .into(),
                    });
                }
            }
        }
        Ok(out)
    }

    /// Cash-settled payoff (no share legs).
    pub fn cash_settled(market: &FrictionMarket, upper: Adapted, lower: Adapted) -> Result<Self> {
        let n = market.depth();
        TxPayoff::new(
            market,
            upper,
            Adapted::constant(n, 0.0),
            lower,
            Adapted::constant(n, 0.0),
        )
    }

    /// Magnitude scale for slacks: cash legs plus share legs at the ask.
    pub fn scale(&self, market: &FrictionMarket) -> f64 {
        let ask_max = market.ask.max_abs();
        self.x_cash
            .max_abs()
            .max(self.y_cash.max_abs())
            .max(self.x_shares.max_abs() * ask_max)
            .max(self.y_shares.max_abs() * ask_max)
            .max(1e-300)
    }

    /// The settlement package `H(s, t)` on the path to `terminal`:
    /// cancellation pays `X_s` when `s < t`, exercise pays `Y_t` otherwise.
    pub fn settlement(&self, terminal: NodeId, s: usize, t: usize) -> (f64, f64) {
        if s < t {
            let node = terminal.ancestor(s);
            (*self.x_cash.get(node), *self.x_shares.get(node))
        } else {
            let node = terminal.ancestor(t);
            (*self.y_cash.get(node), *self.y_shares.get(node))
        }
    }
}

/// The four node functions of the recursions: settle-now curves for the
/// seller (`qa` against `X`, `ra` against `Y`) and the buyer (`qb`, `rb`),
/// as piecewise-linear functions of the share position.
#[derive(Clone, Debug)]
pub struct NodeFns {
    pub qa: PiecewiseLinear,
    pub ra: PiecewiseLinear,
    pub qb: PiecewiseLinear,
    pub rb: PiecewiseLinear,
}

/// Build the settle curves at a node: `qa(y) = X1 + h(y - X2)` and so on,
/// with `h` the node's two-slope kernel.  `qa >= ra` and `qb <= rb`
/// pointwise, and at `y = 0` the buyer curves liquidate the packages:
/// `-qb(0) = theta(X)`, `-rb(0) = theta(Y)`.
pub fn payoff_functions(
    market: &FrictionMarket,
    payoff: &TxPayoff,
    node: NodeId,
) -> Result<NodeFns> {
    let h = pl::h_kernel(*market.bid.get(node), *market.ask.get(node))?;
    let (x1, x2) = (*payoff.x_cash.get(node), *payoff.x_shares.get(node));
    let (y1, y2) = (*payoff.y_cash.get(node), *payoff.y_shares.get(node));
    Ok(NodeFns {
        qa: h.shift_arg(x2).shift_value(x1),
        ra: h.shift_arg(y2).shift_value(y1),
        qb: h.shift_arg(-x2).shift_value(-x1),
        rb: h.shift_arg(-y2).shift_value(-y1),
    })
}

/// Backward-recursion tables of one side.
#[derive(Clone, Debug)]
pub struct PricingTables {
    /// The side's price (`V^a` for the seller, `V^b` for the buyer).
    pub value: f64,
    /// Value curve per node (`z` for the seller, `u` for the buyer).
    pub curve: Adapted<PiecewiseLinear>,
    /// Pointwise max over children, per non-terminal node.
    pub children_max: Adapted<PiecewiseLinear>,
    /// Epigraph-sum transform of `children_max`, per non-terminal node.
    pub transfer: Adapted<PiecewiseLinear>,
}

fn backward_tables(
    market: &FrictionMarket,
    payoff: &TxPayoff,
    seller: bool,
) -> Result<PricingTables> {
    let n = market.depth();
    let mut curve: Adapted<PiecewiseLinear> = Adapted::constant(n, PiecewiseLinear::Bottom);
    for idx in 0..1usize << n {
        let node = NodeId { t: n, idx };
        let fns = payoff_functions(market, payoff, node)?;
        curve.set(node, if seller { fns.ra } else { fns.rb });
    }
    let mut children_max: Adapted<PiecewiseLinear> =
        Adapted::constant(n.saturating_sub(1), PiecewiseLinear::Bottom);
    let mut transfer: Adapted<PiecewiseLinear> =
        Adapted::constant(n.saturating_sub(1), PiecewiseLinear::Bottom);
    for t in (0..n).rev() {
        for idx in 0..1usize << t {
            let node = NodeId { t, idx };
            let cm = pl::pointwise_max(curve.get(node.up()), curve.get(node.down()));
            let tr = pl::gr_transform(&cm, *market.bid.get(node), *market.ask.get(node))?;
            let fns = payoff_functions(market, payoff, node)?;
            let z = if seller {
                pl::pointwise_min(&fns.qa, &pl::pointwise_max(&fns.ra, &tr))
            } else {
                pl::pointwise_min(&fns.rb, &pl::pointwise_max(&fns.qb, &tr))
            };
            children_max.set(node, cm);
            transfer.set(node, tr);
            curve.set(node, z.canonicalize());
        }
    }
    let root = curve.get(NodeId::ROOT);
    if root.is_bottom() {
        return Err(Error::IllPosed(
            "price recursion collapsed to the bottom element at the root".into(),
        ));
    }
    let v0 = root.eval(0.0);
    Ok(PricingTables {
        value: if seller { v0 } else { -v0 },
        curve,
        children_max,
        transfer,
    })
}

/// Seller's (ask) superhedging price `V^a = z_0(0)` with full tables.
pub fn seller_price(market: &FrictionMarket, payoff: &TxPayoff) -> Result<PricingTables> {
    backward_tables(market, payoff, true)
}

/// Buyer's (bid) superhedging price `V^b = -u_0(0)` with full tables.
pub fn buyer_price(market: &FrictionMarket, payoff: &TxPayoff) -> Result<PricingTables> {
    backward_tables(market, payoff, false)
}

// ---------------------------------------------------------------------------
// Randomized stopping times

/// Nonnegative adapted weights summing to one along every path.
#[derive(Clone, Debug)]
pub struct RandomizedStop {
    pub weights: Adapted,
}

impl RandomizedStop {
    pub fn new(weights: Adapted) -> Result<Self> {
        for node in weights.nodes() {
            let w = *weights.get(node);
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "weights must be nonnegative, got {w} at (t={}, idx={})",
                    node.t, node.idx
                )));
            }
        }
        let n = weights.depth();
        for idx in 0..1usize << n {
            let terminal = NodeId { t: n, idx };
            let total: f64 = (0..=n).map(|t| weights.get(terminal.ancestor(t))).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "weights sum to {total} along path {idx}"
                )));
            }
        }
        Ok(RandomizedStop { weights })
    }

    /// Indicator weights of a pure stopping rule.
    pub fn pure(rule: &crate::dynkin::StoppingRule) -> Self {
        let canon = rule.canonical();
        RandomizedStop {
            weights: Adapted::from_fn(rule.depth(), |node| f64::from(canon.flag(node))),
        }
    }

    /// Point mass at a fixed time.
    pub fn at_time(depth: usize, t: usize) -> Self {
        RandomizedStop {
            weights: Adapted::from_fn(depth, |node| f64::from(node.t == t)),
        }
    }

    pub fn depth(&self) -> usize {
        self.weights.depth()
    }

    /// Tail mass `chi*_t = sum_{s >= t} chi_s` along the path to
    /// `terminal`, which is measurable at time `t - 1`.
    pub fn tail_mass(&self, terminal: NodeId, t: usize) -> f64 {
        let head: f64 = (0..t.min(self.depth() + 1))
            .map(|s| self.weights.get(terminal.ancestor(s)))
            .sum();
        1.0 - head
    }
}

/// Convert an adapted stop-probability process into randomized-stopping
/// weights: `chi_t = p_t * prod_{j < t} (1 - p_j)`.  Requires the product
/// of survivals to vanish along every path (force `p_T = 1`).
pub fn p_to_chi(p: &Adapted) -> Result<RandomizedStop> {
    let n = p.depth();
    for node in p.nodes() {
        let v = *p.get(node);
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "stop probabilities must lie in [0,1], got {v}"
            )));
        }
    }
    let mut weights = Adapted::constant(n, 0.0);
    let mut survival = Adapted::constant(n, 1.0);
    for t in 0..=n {
        for idx in 0..1usize << t {
            let node = NodeId { t, idx };
            let surv = if t == 0 {
                1.0
            } else {
                *survival.get(node.parent().unwrap())
            };
            let prob = *p.get(node);
            weights.set(node, surv * prob);
            survival.set(node, surv * (1.0 - prob));
        }
    }
    for idx in 0..1usize << n {
        let node = NodeId { t: n, idx };
        if *survival.get(node) > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "total stopping mass {} < 1 along path {idx}",
                1.0 - *survival.get(node)
            )));
        }
    }
    RandomizedStop::new(weights)
}

/// Time-`chi` value of an adapted process along every path.
pub fn chi_value(process: &Adapted, chi: &RandomizedStop) -> Vec<f64> {
    let n = process.depth();
    (0..1usize << n)
        .map(|idx| {
            let terminal = NodeId { t: n, idx };
            (0..=n)
                .map(|t| {
                    chi.weights.get(terminal.ancestor(t)) * process.get(terminal.ancestor(t))
                })
                .sum()
        })
        .collect()
}

/// The settlement package paid when both players use randomized stopping
/// times: `H(chi, chi~) = sum_{s,t} chi_s chi~_t H(s, t)`, per path.
pub fn pair_value(
    payoff: &TxPayoff,
    chi_seller: &RandomizedStop,
    chi_buyer: &RandomizedStop,
) -> Vec<(f64, f64)> {
    let n = payoff.x_cash.depth();
    (0..1usize << n)
        .map(|idx| {
            let terminal = NodeId { t: n, idx };
            let mut cash = 0.0;
            let mut shares = 0.0;
            for s in 0..=n {
                let ws = *chi_seller.weights.get(terminal.ancestor(s));
                if ws == 0.0 {
                    continue;
                }
                for t in 0..=n {
                    let wt = *chi_buyer.weights.get(terminal.ancestor(t));
                    if wt == 0.0 {
                        continue;
                    }
                    let (c, sh) = payoff.settlement(terminal, s, t);
                    cash += ws * wt * c;
                    shares += ws * wt * sh;
                }
            }
            (cash, shares)
        })
        .collect()
}
