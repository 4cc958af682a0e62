//! Finite-horizon discrete-time Dynkin games on binary event trees.
//!
//! The first player (who pays) picks a stopping time `sigma`, the second
//! (who receives) picks `tau`; the payment is `upper` at `sigma` when
//! `sigma < tau`, `lower` at `tau` when `tau < sigma`, and `diagonal` on
//! ties.  The value solves the backward recursion
//! `V_t = min(upper_t, max(lower_t, E[V_{t+1}]))`, and first-hitting times
//! of the contact sets are epsilon-optimal.  Exhaustive enumeration of all
//! pure stopping times provides the oracle for upper/lower game values.

use crate::error::{Error, Result};
use crate::tree::{Adapted, EventTree, NodeId};

/// Default cap on tree depth for exhaustive stopping-time enumeration;
/// the count grows doubly exponentially (1, 2, 5, 26, 677, ...).
pub const DEFAULT_ENUMERATION_DEPTH: usize = 4;

/// A Dynkin game instance: three adapted payoffs with
/// `lower <= diagonal <= upper` everywhere and equality at maturity.
#[derive(Clone, Debug)]
pub struct DynkinInstance {
    pub tree: EventTree,
    pub upper: Adapted,
    pub lower: Adapted,
    pub diagonal: Adapted,
}

impl DynkinInstance {
    pub fn new(
        tree: EventTree,
        upper: Adapted,
        lower: Adapted,
        diagonal: Adapted,
    ) -> Result<Self> {
        let n = tree.depth();
        for p in [&upper, &lower, &diagonal] {
            if p.depth() != n {
                return Err(Error::ShapeMismatch(format!(
                    "payoff depth {} does not match tree depth {}",
                    p.depth(),
                    n
                )));
            }
            if !p.is_finite() {
                return Err(Error::InvalidParameter(
                    "payoffs must be finite at every node".into(),
                ));
            }
        }
        let inst = DynkinInstance {
            tree,
            upper,
            lower,
            diagonal,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Game-option convention: ties pay the lower process.
    pub fn with_diagonal_lower(tree: EventTree, upper: Adapted, lower: Adapted) -> Result<Self> {
        let diag = lower.clone();
        DynkinInstance::new(tree, upper, lower, diag)
    }

    fn validate(&self) -> Result<()> {
        let n = self.tree.depth();
        let scale = self.scale();
        let tol = 1e-12 * scale.max(1.0);
        for node in self.upper.nodes() {
            let (x, y, z) = (
                *self.upper.get(node),
                *self.lower.get(node),
                *self.diagonal.get(node),
            );
            if y > z + tol || z > x + tol {
                return Err(Error::OrderingViolation {
                    t: node.t,
                    idx: node.idx,
                    what: format!("need lower <= diagonal <= upper, got {y} / {z} / {x}"),
                });
            }
            if node.t == n && ((x - y).abs() > tol || (x - z).abs() > tol) {
                return Err(Error::TerminalMismatch {
                    t: node.t,
                    idx: node.idx,
                    what: format!("upper={x}, lower={y}, diagonal={z}"),
                });
            }
        }
        Ok(())
    }

    /// Max payoff magnitude; used to scale floating-point slacks.
    pub fn scale(&self) -> f64 {
        self.upper
            .max_abs()
            .max(self.lower.max_abs())
            .max(self.diagonal.max_abs())
    }
}

/// Value process of a solved game: `lower <= V <= upper`, `V = upper` at
/// terminal nodes.
#[derive(Clone, Debug)]
pub struct ValueProcess {
    pub values: Adapted,
}

impl ValueProcess {
    pub fn root(&self) -> f64 {
        *self.values.get(NodeId::ROOT)
    }
}

/// Solve the game by backward induction:
/// `V_N = upper_N` and `V_t = min(upper_t, max(lower_t, E[V_{t+1}]))`.
pub fn solve_dp(instance: &DynkinInstance) -> Result<ValueProcess> {
    let n = instance.tree.depth();
    let mut values = instance.upper.clone();
    for t in (0..n).rev() {
        for idx in 0..1usize << t {
            let node = NodeId { t, idx };
            let cont = instance.tree.expect_children(&values, node);
            let v = instance
                .upper
                .get(node)
                .min(instance.lower.get(node).max(cont));
            values.set(node, v);
        }
    }
    Ok(ValueProcess { values })
}

/// A pure stopping time: stop at the first flagged node on each path, or
/// at maturity.  Flags below the first hit are ignored, so the canonical
/// content is an antichain.
#[derive(Clone, Debug, PartialEq)]
pub struct StoppingRule {
    flags: Adapted<bool>,
}

impl StoppingRule {
    pub fn new(flags: Adapted<bool>) -> Self {
        StoppingRule { flags }
    }

    pub fn from_fn(depth: usize, f: impl FnMut(NodeId) -> bool) -> Self {
        StoppingRule {
            flags: Adapted::from_fn(depth, f),
        }
    }

    /// Stop everywhere at a fixed time `t`.
    pub fn at_time(depth: usize, t: usize) -> Self {
        StoppingRule::from_fn(depth, |n| n.t == t)
    }

    pub fn depth(&self) -> usize {
        self.flags.depth()
    }

    pub fn flag(&self, node: NodeId) -> bool {
        *self.flags.get(node)
    }

    /// Stopping time along the path to a terminal node.
    pub fn stop_time(&self, terminal: NodeId) -> usize {
        let n = self.flags.depth();
        for t in 0..=terminal.t {
            if *self.flags.get(terminal.ancestor(t)) {
                return t;
            }
        }
        n
    }

    /// First flagged node at depth >= `from` on the path, or maturity.
    pub fn stop_time_from(&self, terminal: NodeId, from: usize) -> usize {
        let n = self.flags.depth();
        for t in from..=terminal.t {
            if *self.flags.get(terminal.ancestor(t)) {
                return t;
            }
        }
        n
    }

    /// Canonical antichain form: clear flags strictly below a first hit,
    /// set all terminal flags.
    pub fn canonical(&self) -> StoppingRule {
        let depth = self.flags.depth();
        let mut out = Adapted::constant(depth, false);
        fn rec(flags: &Adapted<bool>, out: &mut Adapted<bool>, node: NodeId, depth: usize) {
            if *flags.get(node) || node.t == depth {
                out.set(node, true);
                return;
            }
            rec(flags, out, node.up(), depth);
            rec(flags, out, node.down(), depth);
        }
        rec(&self.flags, &mut out, NodeId::ROOT, depth);
        StoppingRule { flags: out }
    }
}

/// Number of pure stopping times on a subtree of the given depth:
/// `f(0) = 1`, `f(d) = 1 + f(d-1)^2`.
pub fn stopping_time_count(depth: usize) -> u128 {
    let mut c: u128 = 1;
    for _ in 0..depth {
        c = 1 + c * c;
    }
    c
}

/// Enumerate every pure stopping time on a depth-`depth` tree in canonical
/// antichain form.  Refuses when the count exceeds `max_depth`'s implied
/// bound (the count at depth 5 already exceeds 400 000).
pub fn enumerate_rules(depth: usize, max_depth: usize) -> Result<Vec<StoppingRule>> {
    if depth > max_depth {
        return Err(Error::EnumerationTooLarge {
            size: stopping_time_count(depth),
            bound: stopping_time_count(max_depth),
        });
    }
    // Enumerate antichains bottom-up: at each node either stop here or
    // combine independent choices on the two child subtrees.
    fn rec(node: NodeId, depth: usize) -> Vec<Vec<NodeId>> {
        let mut out = vec![vec![node]];
        if node.t < depth {
            let ups = rec(node.up(), depth);
            let downs = rec(node.down(), depth);
            for u in &ups {
                for d in &downs {
                    let mut set = u.clone();
                    set.extend_from_slice(d);
                    out.push(set);
                }
            }
        }
        out
    }
    let sets = rec(NodeId::ROOT, depth);
    Ok(sets
        .into_iter()
        .map(|set| {
            let mut flags = Adapted::constant(depth, false);
            for node in set {
                flags.set(node, true);
            }
            StoppingRule { flags }
        })
        .collect())
}

/// The payment when the first player stops at `s` and the second at `t`
/// on the path to `terminal`: `upper_s`, `lower_t`, or `diagonal_t` on a
/// tie.
pub fn payment_on_path(instance: &DynkinInstance, terminal: NodeId, s: usize, t: usize) -> f64 {
    use std::cmp::Ordering::*;
    match s.cmp(&t) {
        Less => *instance.upper.get(terminal.ancestor(s)),
        Greater => *instance.lower.get(terminal.ancestor(t)),
        Equal => *instance.diagonal.get(terminal.ancestor(t)),
    }
}

/// `E[H(sigma, tau)]` over the tree's path distribution.
pub fn expected_payoff(
    instance: &DynkinInstance,
    sigma: &StoppingRule,
    tau: &StoppingRule,
) -> f64 {
    instance
        .tree
        .paths()
        .iter()
        .map(|&(terminal, prob)| {
            let s = sigma.stop_time(terminal);
            let t = tau.stop_time(terminal);
            prob * payment_on_path(instance, terminal, s, t)
        })
        .sum()
}

/// Upper and lower game values by exhaustive enumeration of all pure
/// stopping-time pairs, including the diagonal payoff.
pub fn brute_force_values(instance: &DynkinInstance, max_depth: usize) -> Result<(f64, f64)> {
    let n = instance.tree.depth();
    let rules = enumerate_rules(n, max_depth)?;
    let paths = instance.tree.paths();
    // Precompute per-rule stop times per path and per-path payoff lookups.
    let stop_times: Vec<Vec<usize>> = rules
        .iter()
        .map(|r| paths.iter().map(|&(tm, _)| r.stop_time(tm)).collect())
        .collect();
    let probs: Vec<f64> = paths.iter().map(|&(_, p)| p).collect();
    let upper_by_path: Vec<Vec<f64>> = paths
        .iter()
        .map(|&(tm, _)| (0..=n).map(|t| *instance.upper.get(tm.ancestor(t))).collect())
        .collect();
    let lower_by_path: Vec<Vec<f64>> = paths
        .iter()
        .map(|&(tm, _)| (0..=n).map(|t| *instance.lower.get(tm.ancestor(t))).collect())
        .collect();
    let diag_by_path: Vec<Vec<f64>> = paths
        .iter()
        .map(|&(tm, _)| (0..=n).map(|t| *instance.diagonal.get(tm.ancestor(t))).collect())
        .collect();

    let value = |si: usize, ti: usize| -> f64 {
        let mut e = 0.0;
        for p in 0..probs.len() {
            let s = stop_times[si][p];
            let t = stop_times[ti][p];
            let h = match s.cmp(&t) {
                std::cmp::Ordering::Less => upper_by_path[p][s],
                std::cmp::Ordering::Greater => lower_by_path[p][t],
                std::cmp::Ordering::Equal => diag_by_path[p][t],
            };
            e += probs[p] * h;
        }
        e
    };

    let r = rules.len();
    let mut upper_value = f64::INFINITY;
    let mut lower_value = f64::NEG_INFINITY;
    for si in 0..r {
        let mut worst = f64::NEG_INFINITY;
        for ti in 0..r {
            worst = worst.max(value(si, ti));
        }
        upper_value = upper_value.min(worst);
    }
    for ti in 0..r {
        let mut best = f64::INFINITY;
        for si in 0..r {
            best = best.min(value(si, ti));
        }
        lower_value = lower_value.max(best);
    }
    Ok((upper_value, lower_value))
}

/// First-hitting epsilon-optimal stopping times: the first player stops
/// when `V >= upper - eps`, the second when `V <= lower + eps`.  Equality
/// is tested with an absolute slack scaled by the payoff magnitude.
pub fn epsilon_optimal_times(
    value: &ValueProcess,
    instance: &DynkinInstance,
    eps: f64,
) -> (StoppingRule, StoppingRule) {
    let slack = 1e-9 * instance.scale();
    let sigma = StoppingRule::from_fn(instance.tree.depth(), |node| {
        *value.values.get(node) >= *instance.upper.get(node) - eps - slack
    });
    let tau = StoppingRule::from_fn(instance.tree.depth(), |node| {
        *value.values.get(node) <= *instance.lower.get(node) + eps + slack
    });
    (sigma, tau)
}

/// Outcome of an exhaustive saddle-point check.
#[derive(Clone, Debug)]
pub struct SaddleReport {
    /// `E[H(sigma, tau)]` for the candidate pair.
    pub pair_value: f64,
    /// Worst gain the second player can achieve by deviating, beyond eps.
    pub buyer_violation: f64,
    /// Worst saving the first player can achieve by deviating, beyond eps.
    pub seller_violation: f64,
}

impl SaddleReport {
    pub fn worst(&self) -> f64 {
        self.buyer_violation.max(self.seller_violation).max(0.0)
    }
}

/// Check the saddle inequalities
/// `E[H(sigma, tau')] - eps <= E[H(sigma, tau)] <= E[H(sigma', tau)] + eps`
/// against every enumerated pure deviation.
pub fn verify_saddle(
    instance: &DynkinInstance,
    sigma: &StoppingRule,
    tau: &StoppingRule,
    eps: f64,
    max_depth: usize,
) -> Result<SaddleReport> {
    let rules = enumerate_rules(instance.tree.depth(), max_depth)?;
    let pair_value = expected_payoff(instance, sigma, tau);
    let mut best_deviation_buyer = f64::NEG_INFINITY;
    let mut best_deviation_seller = f64::INFINITY;
    for rule in &rules {
        best_deviation_buyer = best_deviation_buyer.max(expected_payoff(instance, sigma, rule));
        best_deviation_seller = best_deviation_seller.min(expected_payoff(instance, rule, tau));
    }
    Ok(SaddleReport {
        pair_value,
        buyer_violation: best_deviation_buyer - eps - pair_value,
        seller_violation: pair_value - best_deviation_seller - eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::EventTree;

    /// One-step game: p = 0.5, upper_0 = x0, lower_0 = 0, terminal payoff
    /// {3, 0}; with x0 = 2 the value is min(2, max(0, 1.5)) = 1.5.
    fn one_step(x0: f64) -> DynkinInstance {
        let tree = EventTree::homogeneous(1, 0.5).unwrap();
        let term = |node: NodeId| if node.idx == 1 { 3.0 } else { 0.0 };
        let upper = Adapted::from_fn(1, |n| if n.t == 0 { x0 } else { term(n) });
        let lower = Adapted::from_fn(1, |n| if n.t == 0 { 0.0 } else { term(n) });
        DynkinInstance::with_diagonal_lower(tree, upper, lower).unwrap()
    }

    #[test]
    fn constant_payoffs_give_constant_value() {
        let tree = EventTree::homogeneous(3, 0.4).unwrap();
        let c = Adapted::constant(3, 2.5);
        let inst = DynkinInstance::new(tree, c.clone(), c.clone(), c).unwrap();
        let v = solve_dp(&inst).unwrap();
        for node in v.values.nodes() {
            assert_eq!(*v.values.get(node), 2.5);
        }
        let (up, lo) = brute_force_values(&inst, 4).unwrap();
        assert_eq!(up, 2.5);
        assert_eq!(lo, 2.5);
    }

    #[test]
    fn one_step_hand_value() {
        let inst = one_step(2.0);
        let v = solve_dp(&inst).unwrap();
        assert_eq!(v.root(), 1.5);
        // seller cap binds when upper_0 = 1
        let capped = one_step(1.0);
        assert_eq!(solve_dp(&capped).unwrap().root(), 1.0);
        let (up, lo) = brute_force_values(&inst, 4).unwrap();
        assert!((up - 1.5).abs() < 1e-15);
        assert!((lo - 1.5).abs() < 1e-15);
    }

    #[test]
    fn instance_validation_rejects_bad_orderings() {
        let tree = EventTree::homogeneous(1, 0.5).unwrap();
        let upper = Adapted::constant(1, 0.0);
        let lower = Adapted::constant(1, 1.0);
        assert!(matches!(
            DynkinInstance::with_diagonal_lower(tree.clone(), upper, lower),
            Err(Error::OrderingViolation { .. })
        ));
        let upper = Adapted::from_fn(1, |n| if n.t == 0 { 1.0 } else { 2.0 });
        let lower = Adapted::from_fn(1, |n| if n.t == 0 { 0.0 } else { 1.0 });
        let diag = lower.clone();
        assert!(matches!(
            DynkinInstance::new(tree, upper, lower, diag),
            Err(Error::TerminalMismatch { .. })
        ));
    }

    #[test]
    fn hitting_times_on_the_one_step_instance() {
        let inst = one_step(2.0);
        let v = solve_dp(&inst).unwrap();
        let (sigma, tau) = epsilon_optimal_times(&v, &inst, 0.0);
        for (terminal, _) in inst.tree.paths() {
            assert_eq!(sigma.stop_time(terminal), 1);
            assert_eq!(tau.stop_time(terminal), 1);
        }
        // eps at least the upper-lower span stops immediately
        let (sigma, _) = epsilon_optimal_times(&v, &inst, 10.0);
        assert_eq!(sigma.stop_time(NodeId::from_signs(&[1])), 0);
    }

    #[test]
    fn identical_bounds_stop_at_zero() {
        let tree = EventTree::homogeneous(2, 0.5).unwrap();
        let x = Adapted::from_fn(2, |n| (n.t + n.idx) as f64);
        let inst = DynkinInstance::new(tree, x.clone(), x.clone(), x).unwrap();
        let v = solve_dp(&inst).unwrap();
        let (sigma, tau) = epsilon_optimal_times(&v, &inst, 0.0);
        for (terminal, _) in inst.tree.paths() {
            assert_eq!(sigma.stop_time(terminal), 0);
            assert_eq!(tau.stop_time(terminal), 0);
        }
    }

    #[test]
    fn saddle_zero_violation_and_perturbed_gap() {
        let inst = one_step(2.0);
        let v = solve_dp(&inst).unwrap();
        let (sigma, tau) = epsilon_optimal_times(&v, &inst, 0.0);
        let report = verify_saddle(&inst, &sigma, &tau, 0.0, 4).unwrap();
        assert!(report.worst() <= 1e-10);
        assert!((report.pair_value - 1.5).abs() < 1e-15);
        // stopping at 0 everywhere concedes the full value: gap 1.5 - 0
        let early = StoppingRule::at_time(1, 0);
        let report = verify_saddle(&inst, &sigma, &early, 0.0, 4).unwrap();
        assert!((report.buyer_violation - 1.5).abs() < 1e-12);
    }

    #[test]
    fn enumeration_counts_match() {
        assert_eq!(stopping_time_count(0), 1);
        assert_eq!(stopping_time_count(1), 2);
        assert_eq!(stopping_time_count(2), 5);
        assert_eq!(stopping_time_count(3), 26);
        assert_eq!(stopping_time_count(4), 677);
        for d in 0..=3 {
            assert_eq!(
                enumerate_rules(d, 4).unwrap().len() as u128,
                stopping_time_count(d)
            );
        }
        assert!(matches!(
            enumerate_rules(5, 4),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn canonical_rule_is_an_antichain_cover() {
        let rule = StoppingRule::from_fn(3, |n| n.t == 1 && n.idx == 1 || n.t == 2);
        let canon = rule.canonical();
        for (terminal, _) in EventTree::homogeneous(3, 0.5).unwrap().paths() {
            assert_eq!(rule.stop_time(terminal), canon.stop_time(terminal));
            // exactly one flagged ancestor
            let hits = (0..=3)
                .filter(|&t| canon.flag(terminal.ancestor(t)))
                .count();
            assert_eq!(hits, 1);
        }
    }
}
