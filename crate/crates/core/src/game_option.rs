//! Game-option pricing on CRR trees: the fair price via the Dynkin
//! recursion on discounted payoffs, rational exercise times, and the
//! seller's self-financing hedge extracted from the two-point replication
//! of the stopped value envelope.

use crate::dynkin::{self, DynkinInstance, StoppingRule, ValueProcess};
use crate::error::{Error, Result};
use crate::payoff::{PathPayoff, PathSlice};
use crate::tree::{Adapted, CrrParams, EventTree, NodeId};

/// A game option evaluated on a CRR tree: adapted holder payoff
/// `lower = F(path)` and cancellation payoff `upper = F + Delta`, with the
/// terminal penalty forced to zero unless configured otherwise.
#[derive(Clone, Debug)]
pub struct GameOptionInstance {
    pub params: CrrParams,
    pub tree: EventTree,
    pub prices: Adapted,
    /// Cancellation payoff `X = F + Delta`, undiscounted.
    pub upper: Adapted,
    /// Exercise payoff `Y = F`, undiscounted.
    pub lower: Adapted,
    /// Physical time per step (lattice clock).
    pub dt: f64,
}

impl GameOptionInstance {
    /// Evaluate a payoff functional on every node of the tree.
    pub fn build(params: CrrParams, payoff: &impl PathPayoff, dt: f64) -> Result<Self> {
        GameOptionInstance::build_with(params, payoff, dt, true)
    }

    /// As [`build`](Self::build); `force_terminal` controls whether the
    /// penalty is zeroed at maturity (`X_N := Y_N`).
    pub fn build_with(
        params: CrrParams,
        payoff: &impl PathPayoff,
        dt: f64,
        force_terminal: bool,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let n = params.steps;
        let prices = params.price_process();
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let mut upper = Adapted::constant(n, 0.0);
        let mut lower = Adapted::constant(n, 0.0);
        // Depth-first walk keeping the running price path.
        let mut path: Vec<f64> = Vec::with_capacity(n + 1);
        fn rec(
            node: NodeId,
            params: &CrrParams,
            prices: &Adapted,
            times: &[f64],
            payoff: &impl PathPayoff,
            path: &mut Vec<f64>,
            upper: &mut Adapted,
            lower: &mut Adapted,
        ) -> Result<()> {
            path.push(*prices.get(node));
            let slice = PathSlice::new(&times[..=node.t], path);
            let f = payoff.holder(&slice);
            let d = payoff.penalty(&slice);
            if !(f >= 0.0) || !(d >= 0.0) || !f.is_finite() || !d.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "payoff legs must be finite and nonnegative, got F={f}, Delta={d} at (t={}, idx={})",
                    node.t, node.idx
                )));
            }
            lower.set(node, f);
            upper.set(node, f + d);
            if node.t < params.steps {
                rec(node.up(), params, prices, times, payoff, path, upper, lower)?;
                rec(node.down(), params, prices, times, payoff, path, upper, lower)?;
            }
            path.pop();
            Ok(())
        }
        rec(
            NodeId::ROOT,
            &params,
            &prices,
            &times,
            payoff,
            &mut path,
            &mut upper,
            &mut lower,
        )?;
        if force_terminal {
            for idx in 0..1usize << n {
                let node = NodeId { t: n, idx };
                let y = *lower.get(node);
                upper.set(node, y);
            }
        }
        GameOptionInstance::from_parts(params, upper, lower, dt)
    }

    /// Assemble an instance from explicit payoff processes (already
    /// including any terminal adjustment).
    pub fn from_parts(params: CrrParams, upper: Adapted, lower: Adapted, dt: f64) -> Result<Self> {
        let tree = params.event_tree();
        let prices = params.price_process();
        let n = params.steps;
        if upper.depth() != n || lower.depth() != n {
            return Err(Error::ShapeMismatch(
                "payoff processes must match the tree depth".into(),
            ));
        }
        let inst = GameOptionInstance {
            params,
            tree,
            prices,
            upper,
            lower,
            dt,
        };
        for node in inst.upper.nodes() {
            let (x, y) = (*inst.upper.get(node), *inst.lower.get(node));
            if !(y >= 0.0) || y > x {
                return Err(Error::OrderingViolation {
                    t: node.t,
                    idx: node.idx,
                    what: format!("need 0 <= lower <= upper, got {y} / {x}"),
                });
            }
        }
        Ok(inst)
    }

    /// Discounted payoff processes `(1+r)^{-t} X`, `(1+r)^{-t} Y`.
    pub fn discounted(&self) -> (Adapted, Adapted) {
        let disc = |node: NodeId, v: &f64| self.params.discount(node.t) * v;
        (self.upper.map(disc), self.lower.map(disc))
    }

    /// The Dynkin instance on discounted payoffs with the game-option
    /// diagonal convention (ties pay the holder leg).
    pub fn dynkin(&self) -> Result<DynkinInstance> {
        let (x, y) = self.discounted();
        DynkinInstance::with_diagonal_lower(self.tree.clone(), x, y)
    }

    pub fn scale(&self) -> f64 {
        self.upper.max_abs().max(self.lower.max_abs())
    }
}

/// Result of pricing: the fair price and the discounted value process.
#[derive(Clone, Debug)]
pub struct Priced {
    pub value: f64,
    pub discounted: ValueProcess,
}

/// Fair price of the game option: the Dynkin value of the discounted
/// payoffs.
pub fn price(instance: &GameOptionInstance) -> Result<Priced> {
    let dynkin = instance.dynkin()?;
    let values = dynkin::solve_dp(&dynkin)?;
    Ok(Priced {
        value: values.root(),
        discounted: values,
    })
}

/// Rational exercise times: zero-epsilon hitting times of the contact sets
/// on discounted processes.
pub fn rational_times(
    instance: &GameOptionInstance,
    priced: &Priced,
) -> Result<(StoppingRule, StoppingRule)> {
    let dynkin = instance.dynkin()?;
    Ok(dynkin::epsilon_optimal_times(
        &priced.discounted,
        &dynkin,
        0.0,
    ))
}

/// The seller's hedge: predictable bond/stock positions per step.
///
/// `bond[t]` and `stock[t]` (levels `0..N-1`) are the holdings carried over
/// the step `t -> t+1`, decided at the step-`t` node; `wealth` is the
/// discounted portfolio value at every node.  The self-financing identity
/// holds by construction and [`verify_hedge`] sweeps the domination
/// property.
#[derive(Clone, Debug)]
pub struct HedgePortfolio {
    pub initial_wealth: f64,
    /// Bond units held over the next step, per non-terminal node.
    pub bond: Adapted,
    /// Stock units held over the next step, per non-terminal node.
    pub stock: Adapted,
    /// Discounted wealth at every node.
    pub wealth: Adapted,
}

/// Construct the hedge for a given seller cancellation rule.
///
/// The target is the stopped discounted value envelope `U`: `U = X` tilde
/// on the cancellation set and `max(Y tilde, E[U'])` before it.  For the
/// rational cancellation time the envelope coincides with the value
/// process and the initial wealth equals the fair price.
pub fn extract_hedge(
    instance: &GameOptionInstance,
    sigma: &StoppingRule,
) -> Result<HedgePortfolio> {
    let n = instance.params.steps;
    let (disc_x, disc_y) = instance.discounted();
    let disc_s = instance
        .prices
        .map(|node, v| instance.params.discount(node.t) * v);
    let sigma = sigma.canonical();

    // Stopped envelope, backward.
    let mut envelope = disc_x.clone();
    for t in (0..n).rev() {
        for idx in 0..1usize << t {
            let node = NodeId { t, idx };
            if !sigma.flag(node) {
                let cont = instance.tree.expect_children(&envelope, node);
                envelope.set(node, disc_y.get(node).max(cont));
            }
        }
    }

    let mut bond = Adapted::constant(n.saturating_sub(1), 0.0);
    let mut stock = Adapted::constant(n.saturating_sub(1), 0.0);
    let mut wealth = Adapted::constant(n, 0.0);
    wealth.set(NodeId::ROOT, *envelope.get(NodeId::ROOT));
    // Forward sweep: before the stop, replicate the envelope across the two
    // children; at and after the stop, freeze the wealth in the bond.
    let mut stopped = Adapted::constant(n, false);
    for t in 0..n {
        for idx in 0..1usize << t {
            let node = NodeId { t, idx };
            let here_stopped = *stopped.get(node) || sigma.flag(node);
            let w = *wealth.get(node);
            let (gamma, beta) = if here_stopped {
                (0.0, w)
            } else {
                let su = *disc_s.get(node.up());
                let sd = *disc_s.get(node.down());
                if su == sd {
                    return Err(Error::DegenerateBranch {
                        t: node.t,
                        idx: node.idx,
                    });
                }
                let gamma = (envelope.get(node.up()) - envelope.get(node.down())) / (su - sd);
                (gamma, w - gamma * disc_s.get(node))
            };
            stock.set(node, gamma);
            bond.set(node, beta);
            for child in [node.up(), node.down()] {
                wealth.set(child, beta + gamma * disc_s.get(child));
                stopped.set(child, here_stopped);
            }
        }
    }
    Ok(HedgePortfolio {
        initial_wealth: *envelope.get(NodeId::ROOT),
        bond,
        stock,
        wealth,
    })
}

/// Exhaustive sweep of the hedging property: the worst positive part of
/// `H(sigma, k) - W_{sigma ^ k}` over all paths and all exercise steps,
/// in undiscounted units.
pub fn verify_hedge(
    instance: &GameOptionInstance,
    portfolio: &HedgePortfolio,
    sigma: &StoppingRule,
) -> f64 {
    let n = instance.params.steps;
    let mut worst: f64 = 0.0;
    for (terminal, _) in instance.tree.paths() {
        let s = sigma.stop_time(terminal);
        for k in 0..=n {
            let m = s.min(k);
            let node = terminal.ancestor(m);
            let w = *portfolio.wealth.get(node) / instance.params.discount(m);
            // H(s, k): cancellation pays upper at s when s < k, exercise
            // pays lower at k when k <= s.
            let h = if s < k {
                *instance.upper.get(terminal.ancestor(s))
            } else {
                *instance.lower.get(terminal.ancestor(k))
            };
            worst = worst.max(h - w);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::PayoffSpec;

    /// One-period call: s0 = 1, up = 0.2, down = -0.2, r = 0, strike 1,
    /// penalty 0.05; fair price min(0.05, max(0, 0.1)) = 0.05.
    fn small_call() -> GameOptionInstance {
        let params = CrrParams::new(1.0, 0.2, -0.2, 0.0, 1).unwrap();
        let payoff = PayoffSpec::VanillaCall {
            strike: 1.0,
            penalty: 0.05,
        };
        GameOptionInstance::build(params, &payoff, 1.0).unwrap()
    }

    #[test]
    fn zero_penalty_prices_at_the_holder_leg() {
        let params = CrrParams::new(100.0, 0.1, -0.1, 0.02, 5).unwrap();
        let payoff = PayoffSpec::VanillaPut {
            strike: 100.0,
            penalty: 0.0,
        };
        let inst = GameOptionInstance::build(params, &payoff, 1.0).unwrap();
        let priced = price(&inst).unwrap();
        assert_eq!(priced.value, *inst.lower.get(NodeId::ROOT));
    }

    #[test]
    fn one_period_call_hand_value() {
        let inst = small_call();
        let priced = price(&inst).unwrap();
        assert!((priced.value - 0.05).abs() < 1e-15);
        let (sigma, _tau) = rational_times(&inst, &priced).unwrap();
        // cancellation is immediately rational: V_0 = X_0
        assert_eq!(sigma.stop_time(NodeId::from_signs(&[1])), 0);
    }

    #[test]
    fn hedge_covers_the_one_period_call() {
        let inst = small_call();
        let priced = price(&inst).unwrap();
        let (sigma, _) = rational_times(&inst, &priced).unwrap();
        let hedge = extract_hedge(&inst, &sigma).unwrap();
        assert!((hedge.initial_wealth - priced.value).abs() < 1e-12);
        let worst = verify_hedge(&inst, &hedge, &sigma);
        assert!(worst <= 1e-10 * inst.scale(), "shortfall {worst}");
    }

    #[test]
    fn trivial_hedge_for_zero_penalty() {
        let params = CrrParams::new(2.0, 0.3, -0.25, 0.0, 3).unwrap();
        let payoff = PayoffSpec::Constant {
            value: 1.5,
            penalty: 0.0,
        };
        let inst = GameOptionInstance::build(params, &payoff, 1.0).unwrap();
        let priced = price(&inst).unwrap();
        assert_eq!(priced.value, 1.5);
        let (sigma, _) = rational_times(&inst, &priced).unwrap();
        let hedge = extract_hedge(&inst, &sigma).unwrap();
        assert_eq!(verify_hedge(&inst, &hedge, &sigma), 0.0);
    }

    #[test]
    fn underfunded_portfolio_shows_a_shortfall() {
        let inst = small_call();
        let priced = price(&inst).unwrap();
        let (sigma, _) = rational_times(&inst, &priced).unwrap();
        let mut hedge = extract_hedge(&inst, &sigma).unwrap();
        // shave a cent off every wealth entry
        hedge.wealth = hedge.wealth.map(|_, w| w - 0.01);
        let worst = verify_hedge(&inst, &hedge, &sigma);
        assert!(worst >= 0.01 - 1e-12);
    }

    #[test]
    fn self_financing_identity_holds() {
        let params = CrrParams::new(100.0, 0.15, -0.12, 0.03, 6).unwrap();
        let payoff = PayoffSpec::VanillaPut {
            strike: 105.0,
            penalty: 3.0,
        };
        let inst = GameOptionInstance::build(params, &payoff, 1.0).unwrap();
        let priced = price(&inst).unwrap();
        let (sigma, _) = rational_times(&inst, &priced).unwrap();
        let hedge = extract_hedge(&inst, &sigma).unwrap();
        // (4.19): wealth at a node equals the rebalanced portfolio value of
        // the positions chosen at the parent, in discounted units.
        let disc_s = inst.prices.map(|n, v| inst.params.discount(n.t) * v);
        for t in 0..inst.params.steps {
            for idx in 0..1usize << t {
                let node = NodeId { t, idx };
                let b = *hedge.bond.get(node);
                let g = *hedge.stock.get(node);
                let w = *hedge.wealth.get(node);
                let rebalanced = b + g * disc_s.get(node);
                assert!(
                    (rebalanced - w).abs() <= 1e-10 * w.abs().max(1.0),
                    "self-financing violated at {node:?}"
                );
                // discounted wealth is a martingale under the tree measure
                let e = inst.tree.expect_children(&hedge.wealth, node);
                assert!((e - w).abs() <= 1e-10 * w.abs().max(1.0));
            }
        }
        assert!(verify_hedge(&inst, &hedge, &sigma) <= 1e-10 * inst.scale());
    }
}
