//! Multiple-exercise (swing) game options on binomial trees.
//!
//! All quantities live in discounted units: the bond is identically one
//! and the stock is a martingale under the tree probabilities.  The price
//! is computed by a layered dynamic program: layer `k` values the game
//! with `k` exercises remaining, where both payoff legs of the current
//! claim are augmented by the conditional expectation of the next layer
//! one step ahead.  Consecutive exercises are separated by at least one
//! time step.

use std::collections::HashMap;

use crate::dynkin::{self, DynkinInstance};
use crate::error::{Error, Result};
use crate::tree::{Adapted, EventTree, NodeId};

/// Payoff legs of a single claim: `0 <= lower <= upper` at every node.
#[derive(Clone, Debug)]
pub struct ClaimPayoffs {
    pub upper: Adapted,
    pub lower: Adapted,
}

/// A swing option: `claims[i]` is the (i+1)-th claim to be settled.
#[derive(Clone, Debug)]
pub struct SwingSpec {
    pub tree: EventTree,
    /// Discounted stock prices; a martingale under the tree probabilities.
    pub stock: Adapted,
    pub claims: Vec<ClaimPayoffs>,
}

impl SwingSpec {
    pub fn new(tree: EventTree, stock: Adapted, claims: Vec<ClaimPayoffs>) -> Result<Self> {
        if claims.is_empty() {
            return Err(Error::InvalidParameter(
                "a swing option needs at least one claim".into(),
            ));
        }
        if tree.depth() < 1 {
            return Err(Error::InvalidParameter(
                "swing options need at least one step".into(),
            ));
        }
        let n = tree.depth();
        if stock.depth() != n {
            return Err(Error::ShapeMismatch("stock depth mismatch".into()));
        }
        for (i, claim) in claims.iter().enumerate() {
            if claim.upper.depth() != n || claim.lower.depth() != n {
                return Err(Error::ShapeMismatch(format!(
                    "claim {i} payoff depth mismatch"
                )));
            }
            for node in claim.upper.nodes() {
                let (x, y) = (*claim.upper.get(node), *claim.lower.get(node));
                if !(y >= 0.0 && y <= x && x.is_finite()) {
                    return Err(Error::OrderingViolation {
                        t: node.t,
                        idx: node.idx,
                        what: format!("claim {i} needs 0 <= lower <= upper, got {y} / {x}"),
                    });
                }
            }
        }
        Ok(SwingSpec {
            tree,
            stock,
            claims,
        })
    }

    pub fn exercises(&self) -> usize {
        self.claims.len()
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn scale(&self) -> f64 {
        self.claims
            .iter()
            .map(|c| c.upper.max_abs())
            .fold(1e-300, f64::max)
    }

    /// Index of the claim settled when `layer` exercises remain.
    pub fn claim_for_layer(&self, layer: usize) -> usize {
        self.exercises() - layer + 1
    }

    /// Check that the stock is a martingale under the tree probabilities.
    pub fn validate_martingale(&self, rel_tol: f64) -> Result<()> {
        for node in self.tree.non_terminal_nodes() {
            let e = self.tree.expect_children(&self.stock, node);
            let s = *self.stock.get(node);
            if (e - s).abs() > rel_tol * s.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "stock is not a martingale at (t={}, idx={}): E={e}, S={s}",
                    node.t, node.idx
                )));
            }
        }
        Ok(())
    }
}

/// One layer of the swing recursion.
#[derive(Clone, Debug)]
pub struct Layer {
    /// Cancellation leg including the continuation bonus, terminal-forced.
    pub upper: Adapted,
    /// Exercise leg including the continuation bonus.
    pub lower: Adapted,
    /// Game value of the layer at every node.
    pub values: Adapted,
}

/// Solution of the layered dynamic program; `layers[k-1]` holds layer `k`.
#[derive(Clone, Debug)]
pub struct SwingSolution {
    pub layers: Vec<Layer>,
}

impl SwingSolution {
    /// The swing price `V* = V^(L)_0`.
    pub fn price(&self) -> f64 {
        *self.layers.last().unwrap().values.get(NodeId::ROOT)
    }
}

/// Solve the layered dynamic program.
pub fn solve_swing(spec: &SwingSpec) -> Result<SwingSolution> {
    let n = spec.depth();
    let count = spec.exercises();
    let mut layers: Vec<Layer> = Vec::with_capacity(count);
    for k in 1..=count {
        let claim = &spec.claims[spec.claim_for_layer(k) - 1];
        // Continuation bonus E[V^(k-1)_{(t+1) /\ N} | F_t].
        let bonus = if k == 1 {
            Adapted::constant(n, 0.0)
        } else {
            let prev = &layers[k - 2].values;
            Adapted::from_fn(n, |node| {
                if node.t < n {
                    spec.tree.expect_children(prev, node)
                } else {
                    *prev.get(node)
                }
            })
        };
        let lower = Adapted::from_fn(n, |node| claim.lower.get(node) + bonus.get(node));
        let mut upper = Adapted::from_fn(n, |node| claim.upper.get(node) + bonus.get(node));
        // At maturity the holder claims the exercise leg.
        for idx in 0..1usize << n {
            let node = NodeId { t: n, idx };
            upper.set(node, *lower.get(node));
        }
        let instance =
            DynkinInstance::with_diagonal_lower(spec.tree.clone(), upper.clone(), lower.clone())?;
        let values = dynkin::solve_dp(&instance)?.values;
        layers.push(Layer {
            upper,
            lower,
            values,
        });
    }
    Ok(SwingSolution { layers })
}

/// A stopping strategy: a stop time for the first claim, and for each
/// later claim a stop time that may depend on the payoff history
/// (settlement times and who settled), never before `earliest`.
pub trait SwingStrategy {
    fn stop(
        &self,
        claim: usize,
        history: &[(usize, bool)],
        terminal: NodeId,
        earliest: usize,
    ) -> usize;
}

/// First-hitting strategy built from per-layer contact sets: claim `i`
/// settles at the first flagged node of layer `L - i + 1` at or after the
/// window start, or at maturity.
#[derive(Clone, Debug)]
pub struct HittingStrategy {
    /// `flags[k-1]` is the contact set of layer `k`.
    pub flags: Vec<Adapted<bool>>,
}

impl SwingStrategy for HittingStrategy {
    fn stop(
        &self,
        claim: usize,
        _history: &[(usize, bool)],
        terminal: NodeId,
        earliest: usize,
    ) -> usize {
        let flags = &self.flags[self.flags.len() - claim];
        let n = flags.depth();
        for t in earliest..=n.min(terminal.t) {
            if *flags.get(terminal.ancestor(t)) {
                return t;
            }
        }
        n
    }
}

/// Strategy defined by a closure; useful for tests and perturbations.
pub struct FnStrategy<F>(pub F);

impl<F> SwingStrategy for FnStrategy<F>
where
    F: Fn(usize, &[(usize, bool)], NodeId, usize) -> usize,
{
    fn stop(
        &self,
        claim: usize,
        history: &[(usize, bool)],
        terminal: NodeId,
        earliest: usize,
    ) -> usize {
        (self.0)(claim, history, terminal, earliest)
    }
}

/// The optimal first-hitting strategies of both players: the seller stops
/// a layer where its cancellation leg touches the layer value, the buyer
/// where the exercise leg does.  Equality uses a scaled slack.
pub fn optimal_strategies(
    spec: &SwingSpec,
    solution: &SwingSolution,
) -> (HittingStrategy, HittingStrategy) {
    let slack = 1e-9 * spec.scale();
    let seller = HittingStrategy {
        flags: solution
            .layers
            .iter()
            .map(|layer| {
                Adapted::from_fn(spec.depth(), |node| {
                    (layer.upper.get(node) - layer.values.get(node)).abs() <= slack
                })
            })
            .collect(),
    };
    let buyer = HittingStrategy {
        flags: solution
            .layers
            .iter()
            .map(|layer| {
                Adapted::from_fn(spec.depth(), |node| {
                    (layer.values.get(node) - layer.lower.get(node)).abs() <= slack
                })
            })
            .collect(),
    };
    (seller, buyer)
}

/// Settlement record of one claim on one path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settlement {
    pub seller_time: usize,
    pub buyer_time: usize,
    /// Payment received by the holder (raw claim leg, discounted units).
    pub payment: f64,
}

/// Transcript of a strategy pair along one path.
#[derive(Clone, Debug)]
pub struct PathTranscript {
    pub terminal: NodeId,
    pub prob: f64,
    pub settlements: Vec<Settlement>,
}

/// Play a strategy pair: deterministic rollout on every path, expectation
/// aggregated over the tree probabilities.
pub fn play(
    spec: &SwingSpec,
    seller: &dyn SwingStrategy,
    buyer: &dyn SwingStrategy,
) -> (f64, Vec<PathTranscript>) {
    let n = spec.depth();
    let mut expected = 0.0;
    let mut transcripts = Vec::new();
    for (terminal, prob) in spec.tree.paths() {
        let mut history: Vec<(usize, bool)> = Vec::new();
        let mut window = 0usize;
        let mut settlements = Vec::new();
        for i in 1..=spec.exercises() {
            let s = seller.stop(i, &history, terminal, window).clamp(window, n);
            let b = buyer.stop(i, &history, terminal, window).clamp(window, n);
            let m = s.min(b);
            let claim = &spec.claims[i - 1];
            // the seller pays the cancellation leg only when strictly first
            let payment = if s < b {
                *claim.upper.get(terminal.ancestor(s))
            } else {
                *claim.lower.get(terminal.ancestor(b))
            };
            expected += prob * payment;
            settlements.push(Settlement {
                seller_time: s,
                buyer_time: b,
                payment,
            });
            history.push((m, s < b));
            window = n.min(m + 1);
        }
        transcripts.push(PathTranscript {
            terminal,
            prob,
            settlements,
        });
    }
    (expected, transcripts)
}

/// Antichain stopping rules on the subtree rooted at `root`.
fn subtree_rules(root: NodeId, n: usize, max_depth: usize) -> Result<Vec<Vec<NodeId>>> {
    if n - root.t > max_depth {
        return Err(Error::EnumerationTooLarge {
            size: dynkin::stopping_time_count(n - root.t),
            bound: dynkin::stopping_time_count(max_depth),
        });
    }
    fn rec(node: NodeId, n: usize) -> Vec<Vec<NodeId>> {
        let mut out = vec![vec![node]];
        if node.t < n {
            for u in rec(node.up(), n) {
                for d in rec(node.down(), n) {
                    let mut set = u.clone();
                    set.extend_from_slice(&d);
                    out.push(set);
                }
            }
        }
        out
    }
    Ok(rec(root, n))
}

/// Best response against a first-hitting opponent by literal enumeration
/// of the history-indexed stopping-time tables: at every reachable
/// (claim, window-start node) state the deviating player iterates over all
/// stopping rules on that subtree; mutually exclusive histories are
/// optimized independently, which spans the full strategy space.
fn best_response(
    spec: &SwingSpec,
    opponent: &HittingStrategy,
    deviator_is_buyer: bool,
    max_depth: usize,
) -> Result<f64> {
    fn state_value(
        spec: &SwingSpec,
        opponent: &HittingStrategy,
        deviator_is_buyer: bool,
        max_depth: usize,
        claim: usize,
        node: NodeId,
        memo: &mut HashMap<(usize, NodeId), f64>,
    ) -> Result<f64> {
        if let Some(&v) = memo.get(&(claim, node)) {
            return Ok(v);
        }
        let n = spec.depth();
        let count = spec.exercises();
        let value = if claim > count {
            0.0
        } else if node.t == n {
            // everything left settles at maturity on the exercise leg
            (claim..=count)
                .map(|j| *spec.claims[j - 1].lower.get(node))
                .sum()
        } else {
            let layer_idx = count - claim;
            let mut best = if deviator_is_buyer {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
            for rule in subtree_rules(node, n, max_depth)? {
                let flagged: std::collections::HashSet<NodeId> = rule.into_iter().collect();
                let v = rollout(
                    spec,
                    opponent,
                    deviator_is_buyer,
                    max_depth,
                    claim,
                    layer_idx,
                    node,
                    &flagged,
                    memo,
                )?;
                best = if deviator_is_buyer {
                    best.max(v)
                } else {
                    best.min(v)
                };
            }
            best
        };
        memo.insert((claim, node), value);
        Ok(value)
    }

    #[allow(clippy::too_many_arguments)]
    fn rollout(
        spec: &SwingSpec,
        opponent: &HittingStrategy,
        deviator_is_buyer: bool,
        max_depth: usize,
        claim: usize,
        layer_idx: usize,
        cur: NodeId,
        flagged: &std::collections::HashSet<NodeId>,
        memo: &mut HashMap<(usize, NodeId), f64>,
    ) -> Result<f64> {
        let n = spec.depth();
        let count = spec.exercises();
        let opp_here = *opponent.flags[layer_idx].get(cur) || cur.t == n;
        let dev_here = flagged.contains(&cur) || cur.t == n;
        if opp_here || dev_here {
            let (seller_here, buyer_here) = if deviator_is_buyer {
                (opp_here, dev_here)
            } else {
                (dev_here, opp_here)
            };
            let legs = &spec.claims[claim - 1];
            let payment = if seller_here && !buyer_here {
                *legs.upper.get(cur)
            } else {
                *legs.lower.get(cur)
            };
            let cont = if claim == count {
                0.0
            } else if cur.t == n {
                ((claim + 1)..=count)
                    .map(|j| *spec.claims[j - 1].lower.get(cur))
                    .sum()
            } else {
                let p = spec.tree.p_up(cur);
                let vu = state_value(
                    spec,
                    opponent,
                    deviator_is_buyer,
                    max_depth,
                    claim + 1,
                    cur.up(),
                    memo,
                )?;
                let vd = state_value(
                    spec,
                    opponent,
                    deviator_is_buyer,
                    max_depth,
                    claim + 1,
                    cur.down(),
                    memo,
                )?;
                p * vu + (1.0 - p) * vd
            };
            return Ok(payment + cont);
        }
        let p = spec.tree.p_up(cur);
        let vu = rollout(
            spec,
            opponent,
            deviator_is_buyer,
            max_depth,
            claim,
            layer_idx,
            cur.up(),
            flagged,
            memo,
        )?;
        let vd = rollout(
            spec,
            opponent,
            deviator_is_buyer,
            max_depth,
            claim,
            layer_idx,
            cur.down(),
            flagged,
            memo,
        )?;
        Ok(p * vu + (1.0 - p) * vd)
    }

    let mut memo = HashMap::new();
    state_value(
        spec,
        opponent,
        deviator_is_buyer,
        max_depth,
        1,
        NodeId::ROOT,
        &mut memo,
    )
}

/// Saddle verification report for a swing strategy pair.
#[derive(Clone, Debug)]
pub struct SwingSaddleReport {
    pub pair_value: f64,
    /// `max_b G(s*, b)` over every buyer strategy.
    pub best_buyer_deviation: f64,
    /// `min_s G(s, b*)` over every seller strategy.
    pub best_seller_deviation: f64,
}

impl SwingSaddleReport {
    pub fn worst_violation(&self) -> f64 {
        (self.best_buyer_deviation - self.pair_value)
            .max(self.pair_value - self.best_seller_deviation)
            .max(0.0)
    }
}

/// Verify the saddle inequalities `G(s*, b) <= G(s*, b*) <= G(s, b*)`
/// against exhaustively enumerated opponent strategy tables.
pub fn verify_swing_saddle(
    spec: &SwingSpec,
    seller: &HittingStrategy,
    buyer: &HittingStrategy,
    max_depth: usize,
    max_claims: usize,
) -> Result<SwingSaddleReport> {
    if spec.depth() > max_depth || spec.exercises() > max_claims {
        return Err(Error::EnumerationTooLarge {
            size: (spec.depth().max(spec.exercises())) as u128,
            bound: (max_depth.max(max_claims)) as u128,
        });
    }
    let (pair_value, _) = play(spec, seller, buyer);
    let best_buyer_deviation = best_response(spec, seller, true, max_depth)?;
    let best_seller_deviation = best_response(spec, buyer, false, max_depth)?;
    Ok(SwingSaddleReport {
        pair_value,
        best_buyer_deviation,
        best_seller_deviation,
    })
}

/// The seller's multi-exercise hedge: initial capital `V*` and a
/// replication allocation per (node, remaining-claims) pair.
#[derive(Clone, Debug)]
pub struct SwingPortfolio {
    pub initial: f64,
    /// `gamma[k-1]` has depth `N-1`: shares held over the next step when
    /// `k` claims remain outstanding.
    pub gamma: Vec<Adapted>,
}

impl SwingPortfolio {
    /// Shares bought at `node` when `remaining` claims are outstanding;
    /// the allocation rule is independent of the wealth argument.
    pub fn gamma(&self, node: NodeId, remaining: usize) -> f64 {
        if remaining == 0 {
            0.0
        } else {
            *self.gamma[remaining - 1].get(node)
        }
    }
}

/// Build the hedge: over each step the allocation replicates the spread
/// of the active layer's value across the two children.
pub fn swing_hedge(spec: &SwingSpec, solution: &SwingSolution) -> Result<SwingPortfolio> {
    spec.validate_martingale(1e-9)?;
    let n = spec.depth();
    let mut gamma = Vec::with_capacity(spec.exercises());
    for layer in &solution.layers {
        let mut g = Adapted::constant(n - 1, 0.0);
        for t in 0..n {
            for idx in 0..1usize << t {
                let node = NodeId { t, idx };
                let su = *spec.stock.get(node.up());
                let sd = *spec.stock.get(node.down());
                if su == sd {
                    return Err(Error::DegenerateBranch {
                        t: node.t,
                        idx: node.idx,
                    });
                }
                g.set(
                    node,
                    (layer.values.get(node.up()) - layer.values.get(node.down())) / (su - sd),
                );
            }
        }
        gamma.push(g);
    }
    Ok(SwingPortfolio {
        initial: solution.price(),
        gamma,
    })
}

/// Wealth rollout of a portfolio against a strategy pair along every
/// path, following the self-financing dynamics with payments subtracted
/// at their settlement times; returns the minimum wealth over paths and
/// times.
pub fn rollout_wealth(
    spec: &SwingSpec,
    portfolio: &SwingPortfolio,
    seller: &dyn SwingStrategy,
    buyer: &dyn SwingStrategy,
) -> f64 {
    let n = spec.depth();
    let mut min_wealth = f64::INFINITY;
    for (terminal, _prob) in spec.tree.paths() {
        let mut history: Vec<(usize, bool)> = Vec::new();
        let mut window = 0usize;
        let mut pay_at: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
        for i in 1..=spec.exercises() {
            let s = seller.stop(i, &history, terminal, window).clamp(window, n);
            let b = buyer.stop(i, &history, terminal, window).clamp(window, n);
            let m = s.min(b);
            let claim = &spec.claims[i - 1];
            let payment = if s < b {
                *claim.upper.get(terminal.ancestor(s))
            } else {
                *claim.lower.get(terminal.ancestor(b))
            };
            pay_at[m].push(payment);
            history.push((m, s < b));
            window = n.min(m + 1);
        }
        let mut paid = 0usize;
        let mut w = portfolio.initial;
        for p in &pay_at[0] {
            w -= p;
            paid += 1;
        }
        min_wealth = min_wealth.min(w);
        for k in 1..=n {
            if paid < spec.exercises() {
                let node = terminal.ancestor(k - 1);
                let remaining = spec.exercises() - paid;
                let g = portfolio.gamma(node, remaining);
                let ds = spec.stock.get(terminal.ancestor(k)) - spec.stock.get(node);
                w += g * ds;
                for p in &pay_at[k] {
                    w -= p;
                    paid += 1;
                }
            }
            min_wealth = min_wealth.min(w);
        }
    }
    min_wealth
}

/// Minimum hedge wealth over *every* buyer strategy, path and time.
///
/// Buyer decisions on disjoint events are explored independently; for the
/// pathwise minimum this spans the full strategy space, because any
/// single path's decision sequence extends to a valid strategy.
pub fn verify_hedge_wealth(
    spec: &SwingSpec,
    portfolio: &SwingPortfolio,
    seller: &HittingStrategy,
) -> f64 {
    // `claim` is the next open claim; wealth is post-payment at `node`.
    fn settle_here(
        spec: &SwingSpec,
        portfolio: &SwingPortfolio,
        seller: &HittingStrategy,
        node: NodeId,
        claim: usize,
        wealth: f64,
        min_seen: &mut f64,
    ) {
        let n = spec.depth();
        let count = spec.exercises();
        if claim > count {
            advance(spec, portfolio, seller, node, claim, wealth, min_seen);
            return;
        }
        if node.t == n {
            let mut w = wealth;
            for j in claim..=count {
                w -= *spec.claims[j - 1].lower.get(node);
                *min_seen = (*min_seen).min(w);
            }
            return;
        }
        let seller_here = *seller.flags[count - claim].get(node);
        if seller_here {
            // the buyer may exercise simultaneously (lower leg) or let the
            // seller cancel (upper leg); both settle the claim now
            for leg in [
                *spec.claims[claim - 1].upper.get(node),
                *spec.claims[claim - 1].lower.get(node),
            ] {
                let w = wealth - leg;
                *min_seen = (*min_seen).min(w);
                advance(spec, portfolio, seller, node, claim + 1, w, min_seen);
            }
            return;
        }
        // buyer free choice: exercise now ...
        let w_ex = wealth - *spec.claims[claim - 1].lower.get(node);
        *min_seen = (*min_seen).min(w_ex);
        advance(spec, portfolio, seller, node, claim + 1, w_ex, min_seen);
        // ... or continue
        advance(spec, portfolio, seller, node, claim, wealth, min_seen);
    }

    fn advance(
        spec: &SwingSpec,
        portfolio: &SwingPortfolio,
        seller: &HittingStrategy,
        node: NodeId,
        claim: usize,
        wealth: f64,
        min_seen: &mut f64,
    ) {
        let n = spec.depth();
        let count = spec.exercises();
        if node.t == n {
            return;
        }
        let remaining = if claim > count { 0 } else { count - claim + 1 };
        let g = portfolio.gamma(node, remaining);
        for child in [node.up(), node.down()] {
            let w = wealth + g * (spec.stock.get(child) - spec.stock.get(node));
            *min_seen = (*min_seen).min(w);
            settle_here(spec, portfolio, seller, child, claim, w, min_seen);
        }
    }

    let mut min_seen = portfolio.initial;
    settle_here(
        spec,
        portfolio,
        seller,
        NodeId::ROOT,
        1,
        portfolio.initial,
        &mut min_seen,
    );
    min_seen
}
