//! Finite binary event trees, CRR market dynamics, and the discretized
//! Black-Scholes parameterization.
//!
//! Trees are non-recombining: a node is identified with the +/-1 sign
//! sequence leading to it, so path-dependent payoffs can read whole
//! histories.  Recombining fast paths for Markov payoffs live in
//! [`crate::bridge::recombining`].

use crate::error::{Error, Result};

/// A single market move: `+1` (up) or `-1` (down).
pub type Sign = i8;

/// Address of a tree node.
///
/// `idx` encodes the sign prefix as bits, first step in the most significant
/// position, `+1 -> 1` and `-1 -> 0`.  Within a level, increasing `idx` is
/// lexicographic order of the prefix with `-1 < +1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct NodeId {
    pub t: usize,
    pub idx: usize,
}

impl NodeId {
    pub const ROOT: NodeId = NodeId { t: 0, idx: 0 };

    /// Child reached by appending `sign` to this node's prefix.
    pub fn child(self, sign: Sign) -> NodeId {
        let bit = usize::from(sign > 0);
        NodeId {
            t: self.t + 1,
            idx: 2 * self.idx + bit,
        }
    }

    pub fn up(self) -> NodeId {
        self.child(1)
    }

    pub fn down(self) -> NodeId {
        self.child(-1)
    }

    pub fn parent(self) -> Option<NodeId> {
        (self.t > 0).then(|| NodeId {
            t: self.t - 1,
            idx: self.idx / 2,
        })
    }

    /// Sign taken at step `k` (0-based) on the path to this node.
    pub fn sign_at(self, k: usize) -> Sign {
        debug_assert!(k < self.t);
        if (self.idx >> (self.t - 1 - k)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// The full sign prefix identifying this node.
    pub fn signs(self) -> Vec<Sign> {
        (0..self.t).map(|k| self.sign_at(k)).collect()
    }

    /// Node identified by a sign prefix.
    pub fn from_signs(signs: &[Sign]) -> NodeId {
        let mut node = NodeId::ROOT;
        for &s in signs {
            node = node.child(s);
        }
        node
    }

    /// Ancestor at depth `k <= t` (the length-`k` prefix of this node).
    pub fn ancestor(self, k: usize) -> NodeId {
        debug_assert!(k <= self.t);
        NodeId {
            t: k,
            idx: self.idx >> (self.t - k),
        }
    }
}

/// Enumerate all nodes of a depth-`n` tree in the canonical depth-first
/// order used by file formats: preorder, up child before down child.
pub fn dfs_nodes(depth: usize) -> Vec<NodeId> {
    fn rec(node: NodeId, depth: usize, out: &mut Vec<NodeId>) {
        out.push(node);
        if node.t < depth {
            rec(node.up(), depth, out);
            rec(node.down(), depth, out);
        }
    }
    let mut out = Vec::with_capacity((1usize << (depth + 1)) - 1);
    rec(NodeId::ROOT, depth, &mut out);
    out
}

/// Preorder rank of `node` in the depth-first enumeration of a depth-`n`
/// tree; inverse of the position in [`dfs_nodes`].
pub fn dfs_rank(node: NodeId, depth: usize) -> usize {
    debug_assert!(node.t <= depth);
    let mut rank = 0usize;
    let mut cur = NodeId::ROOT;
    for k in 0..node.t {
        rank += 1; // step into a child subtree
        if node.sign_at(k) < 0 {
            // skip the whole up-subtree rooted at depth cur.t + 1
            rank += (1usize << (depth - cur.t)) - 1;
        }
        cur = cur.child(node.sign_at(k));
    }
    rank
}

/// Values attached to every node of a tree, one per information atom;
/// the discrete analogue of an adapted process.
#[derive(Clone, Debug, PartialEq)]
pub struct Adapted<T = f64> {
    levels: Vec<Vec<T>>,
}

impl<T: Clone> Adapted<T> {
    /// Build from a function of the node.
    pub fn from_fn(depth: usize, mut f: impl FnMut(NodeId) -> T) -> Self {
        let levels = (0..=depth)
            .map(|t| (0..1usize << t).map(|idx| f(NodeId { t, idx })).collect())
            .collect();
        Adapted { levels }
    }

    pub fn constant(depth: usize, value: T) -> Self {
        Adapted::from_fn(depth, |_| value.clone())
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn get(&self, node: NodeId) -> &T {
        &self.levels[node.t][node.idx]
    }

    pub fn set(&mut self, node: NodeId, value: T) {
        self.levels[node.t][node.idx] = value;
    }

    pub fn level(&self, t: usize) -> &[T] {
        &self.levels[t]
    }

    pub fn level_mut(&mut self, t: usize) -> &mut [T] {
        &mut self.levels[t]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..=self.depth()).flat_map(|t| (0..1usize << t).map(move |idx| NodeId { t, idx }))
    }

    pub fn map<U: Clone>(&self, mut f: impl FnMut(NodeId, &T) -> U) -> Adapted<U> {
        Adapted {
            levels: (0..=self.depth())
                .map(|t| {
                    (0..1usize << t)
                        .map(|idx| f(NodeId { t, idx }, &self.levels[t][idx]))
                        .collect()
                })
                .collect(),
        }
    }

    /// Validate that per-level lengths match the binary-tree layout.
    pub fn from_levels(levels: Vec<Vec<T>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::ShapeMismatch("no levels".into()));
        }
        for (t, lv) in levels.iter().enumerate() {
            if lv.len() != 1 << t {
                return Err(Error::ShapeMismatch(format!(
                    "level {} has {} entries, expected {}",
                    t,
                    lv.len(),
                    1usize << t
                )));
            }
        }
        Ok(Adapted { levels })
    }
}

impl Adapted<f64> {
    /// Largest absolute value over all nodes; the natural scale for slacks.
    pub fn max_abs(&self) -> f64 {
        self.levels
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().flatten().all(|v| v.is_finite())
    }
}

/// Finite binary event tree: depth and one-step probabilities of the `+1`
/// child at every non-terminal node.
#[derive(Clone, Debug)]
pub struct EventTree {
    depth: usize,
    /// `prob_up[t][idx]` for nodes with `t < depth`.
    prob_up: Vec<Vec<f64>>,
}

impl EventTree {
    pub fn new(depth: usize, prob_up: Vec<Vec<f64>>) -> Result<Self> {
        if prob_up.len() != depth {
            return Err(Error::ShapeMismatch(format!(
                "prob_up has {} levels, expected {}",
                prob_up.len(),
                depth
            )));
        }
        for (t, lv) in prob_up.iter().enumerate() {
            if lv.len() != 1 << t {
                return Err(Error::ShapeMismatch(format!(
                    "prob_up level {} has {} entries, expected {}",
                    t,
                    lv.len(),
                    1usize << t
                )));
            }
            for (idx, &p) in lv.iter().enumerate() {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "prob_up must lie in (0,1), got {p} at node (t={t}, idx={idx})"
                    )));
                }
            }
        }
        Ok(EventTree { depth, prob_up })
    }

    /// Tree with the same one-step probability at every node.
    pub fn homogeneous(depth: usize, p: f64) -> Result<Self> {
        EventTree::new(depth, (0..depth).map(|t| vec![p; 1 << t]).collect())
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Probability of the `+1` child of a non-terminal node.
    pub fn p_up(&self, node: NodeId) -> f64 {
        self.prob_up[node.t][node.idx]
    }

    /// One-step conditional expectation of a process at a non-terminal node.
    pub fn expect_children(&self, values: &Adapted, node: NodeId) -> f64 {
        let p = self.p_up(node);
        p * values.get(node.up()) + (1.0 - p) * values.get(node.down())
    }

    /// Probability of the path leading to `node`.
    pub fn path_prob(&self, node: NodeId) -> f64 {
        let mut p = 1.0;
        let mut cur = NodeId::ROOT;
        for k in 0..node.t {
            let q = self.p_up(cur);
            let s = node.sign_at(k);
            p *= if s > 0 { q } else { 1.0 - q };
            cur = cur.child(s);
        }
        p
    }

    /// Terminal nodes together with their path probabilities.
    pub fn paths(&self) -> Vec<(NodeId, f64)> {
        let mut out = Vec::with_capacity(1 << self.depth);
        // Walk down accumulating probabilities level by level.
        let mut probs = vec![1.0f64];
        for t in 0..self.depth {
            let mut next = vec![0.0; 1 << (t + 1)];
            for (idx, &pr) in probs.iter().enumerate() {
                let p = self.prob_up[t][idx];
                next[2 * idx + 1] = pr * p;
                next[2 * idx] = pr * (1.0 - p);
            }
            probs = next;
        }
        for (idx, &pr) in probs.iter().enumerate() {
            out.push((
                NodeId {
                    t: self.depth,
                    idx,
                },
                pr,
            ));
        }
        out
    }

    pub fn non_terminal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.depth).flat_map(|t| (0..1usize << t).map(move |idx| NodeId { t, idx }))
    }
}

/// Cox-Ross-Rubinstein market parameters on a depth-`steps` tree.
///
/// Per-step returns are `up` with the martingale probability and `down`
/// otherwise; the no-arbitrage strip `-1 < down < rate < up` is enforced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrrParams {
    pub s0: f64,
    pub up: f64,
    pub down: f64,
    pub rate: f64,
    pub steps: usize,
}

impl CrrParams {
    pub fn new(s0: f64, up: f64, down: f64, rate: f64, steps: usize) -> Result<Self> {
        if !(s0 > 0.0) || !s0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial price must be positive, got {s0}"
            )));
        }
        if !(down > -1.0) || !up.is_finite() || !down.is_finite() || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "returns must be finite with down > -1, got up={up}, down={down}, rate={rate}"
            )));
        }
        if !(down < rate && rate < up) {
            return Err(Error::ArbitrageBounds { down, rate, up });
        }
        Ok(CrrParams {
            s0,
            up,
            down,
            rate,
            steps,
        })
    }

    /// The risk-neutral probability `p* = (rate - down) / (up - down)`;
    /// plugging it into the expected per-step return gives `rate` exactly.
    pub fn martingale_prob(&self) -> f64 {
        (self.rate - self.down) / (self.up - self.down)
    }

    /// Event tree carrying the martingale measure at every node.
    pub fn event_tree(&self) -> EventTree {
        EventTree::homogeneous(self.steps, self.martingale_prob())
            .expect("martingale probability lies in (0,1) by the arbitrage bounds")
    }

    /// Stock price at a node: `s0 * prod_{k} (1 + rho_k)` over the node's
    /// sign prefix.
    pub fn path_price(&self, node: NodeId) -> f64 {
        let mut s = self.s0;
        for k in 0..node.t {
            s *= if node.sign_at(k) > 0 {
                1.0 + self.up
            } else {
                1.0 + self.down
            };
        }
        s
    }

    /// Price process over the whole tree.
    pub fn price_process(&self) -> Adapted {
        let mut levels = vec![vec![self.s0]];
        for t in 0..self.steps {
            let prev = &levels[t];
            let mut next = vec![0.0; 1 << (t + 1)];
            for (idx, &s) in prev.iter().enumerate() {
                next[2 * idx + 1] = s * (1.0 + self.up);
                next[2 * idx] = s * (1.0 + self.down);
            }
            levels.push(next);
        }
        Adapted::from_levels(levels).expect("layout is consistent by construction")
    }

    /// Discount factor `(1 + rate)^{-t}`.
    pub fn discount(&self, t: usize) -> f64 {
        (1.0 + self.rate).powi(-(t as i32))
    }
}

/// Discretization of a Black-Scholes market by an `n`-step CRR market.
///
/// Per-step quantities follow the exponential parameterization: rate
/// `exp(rT/n) - 1`, returns `exp(rT/n +/- kappa sqrt(T/n)) - 1`, and
/// up-probability `1 / (exp(kappa sqrt(T/n)) + 1)`, under which the
/// expected per-step return equals the per-step rate exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsDiscretization {
    pub rate: f64,
    pub vol: f64,
    pub maturity: f64,
    pub steps: usize,
    pub step_rate: f64,
    pub step_up: f64,
    pub step_down: f64,
    pub prob_up: f64,
}

/// Build the `n`-step CRR discretization of a Black-Scholes market.
pub fn bs_to_crr(rate: f64, vol: f64, maturity: f64, steps: usize) -> Result<BsDiscretization> {
    if !(vol > 0.0) || !vol.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "volatility must be positive, got {vol}"
        )));
    }
    if !(maturity > 0.0) || !maturity.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "maturity must be positive, got {maturity}"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    if !rate.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rate must be finite, got {rate}"
        )));
    }
    let dt = maturity / steps as f64;
    let h = vol * dt.sqrt();
    let step_rate = (rate * dt).exp() - 1.0;
    let step_up = (rate * dt + h).exp() - 1.0;
    let step_down = (rate * dt - h).exp() - 1.0;
    let prob_up = 1.0 / (h.exp() + 1.0);
    let d = BsDiscretization {
        rate,
        vol,
        maturity,
        steps,
        step_rate,
        step_up,
        step_down,
        prob_up,
    };
    // Martingale identity, exact algebraically; guard against parameter
    // combinations that underflow it.
    let lhs = d.prob_up * (1.0 + d.step_up) + (1.0 - d.prob_up) * (1.0 + d.step_down);
    let rhs = 1.0 + d.step_rate;
    if (lhs - rhs).abs() > 1e-12 * rhs.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "martingale identity violated numerically: E[1+rho]={lhs}, 1+r={rhs}"
        )));
    }
    Ok(d)
}

impl BsDiscretization {
    /// Physical time per lattice step.
    pub fn dt(&self) -> f64 {
        self.maturity / self.steps as f64
    }

    /// The per-step Brownian increment magnitude `kappa sqrt(T/n)`.
    pub fn log_step(&self) -> f64 {
        self.vol * self.dt().sqrt()
    }

    /// CRR parameters for an initial price `z`.
    pub fn to_crr(&self, z: f64) -> Result<CrrParams> {
        CrrParams::new(z, self.step_up, self.step_down, self.step_rate, self.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn martingale_prob_examples() {
        let p = CrrParams::new(1.0, 0.1, -0.1, 0.0, 1).unwrap();
        assert_eq!(p.martingale_prob(), 0.5);
        let p = CrrParams::new(1.0, 0.2, -0.1, 0.02, 1).unwrap();
        assert!(close(p.martingale_prob(), 0.4, 1e-15));
        let p = CrrParams::new(1.0, 1.0, -0.5, 0.25, 1).unwrap();
        assert!(close(p.martingale_prob(), 0.5, 1e-15));
    }

    #[test]
    fn martingale_prob_rejects_arbitrage() {
        assert!(matches!(
            CrrParams::new(1.0, 0.1, -0.1, 0.2, 1),
            Err(Error::ArbitrageBounds { .. })
        ));
        assert!(matches!(
            CrrParams::new(1.0, 0.1, 0.05, 0.01, 1),
            Err(Error::ArbitrageBounds { .. })
        ));
    }

    #[test]
    fn path_price_examples() {
        let p = CrrParams::new(100.0, 0.1, -0.1, 0.0, 2).unwrap();
        assert_eq!(p.path_price(NodeId::ROOT), 100.0);
        assert!(close(p.path_price(NodeId::from_signs(&[1, 1])), 121.0, 1e-14));
        assert!(close(p.path_price(NodeId::from_signs(&[1, -1])), 99.0, 1e-14));
    }

    #[test]
    fn discount_examples() {
        let p = CrrParams::new(1.0, 0.2, -0.2, 0.1, 3).unwrap();
        assert_eq!(p.discount(0), 1.0);
        assert!(close(p.discount(1), 1.0 / 1.1, 1e-15));
        let q = CrrParams::new(1.0, 0.2, -0.2, 0.0, 3).unwrap();
        assert_eq!(q.discount(3), 1.0);
    }

    #[test]
    fn bs_to_crr_examples() {
        // kappa*sqrt(T/n) -> 0 limit gives p -> 1/2.
        let d = bs_to_crr(0.0, 1e-9, 1.0, 1).unwrap();
        assert!((d.prob_up - 0.5).abs() < 1e-9);
        // direct formula evaluation
        let d = bs_to_crr(0.05, 0.2, 1.0, 100).unwrap();
        assert!(close(d.prob_up, 1.0 / (0.02f64.exp() + 1.0), 1e-15));
        // r=0, kappa=1, T=1, n=1
        let d = bs_to_crr(0.0, 1.0, 1.0, 1).unwrap();
        assert!(close(d.step_up, 1f64.exp() - 1.0, 1e-15));
        assert!(close(d.step_down, (-1f64).exp() - 1.0, 1e-15));
        assert_eq!(d.step_rate, 0.0);
    }

    #[test]
    fn bs_to_crr_rejects_bad_params() {
        assert!(bs_to_crr(0.05, 0.0, 1.0, 10).is_err());
        assert!(bs_to_crr(0.05, 0.2, 0.0, 10).is_err());
        assert!(bs_to_crr(0.05, 0.2, 1.0, 0).is_err());
    }

    #[test]
    fn lattice_discounting_matches_the_continuous_rate_at_lattice_times() {
        // (1 + step_rate)^-k equals exp(-r k T / n) by the exponential
        // parameterization; asserted rather than assumed
        for (r, t, n) in [(0.05, 1.0, 64), (0.12, 0.25, 7), (0.0, 2.0, 16)] {
            let d = bs_to_crr(r, 0.3, t, n).unwrap();
            let params = d.to_crr(100.0).unwrap();
            for k in 0..=n {
                let lattice = params.discount(k);
                let continuous = (-r * k as f64 * t / n as f64).exp();
                assert!(
                    (lattice - continuous).abs() <= 1e-13 * continuous,
                    "r={r}, k={k}: {lattice} vs {continuous}"
                );
            }
        }
    }

    #[test]
    fn martingale_identity_per_node() {
        let p = CrrParams::new(50.0, 0.17, -0.08, 0.03, 6).unwrap();
        let tree = p.event_tree();
        let prices = p.price_process();
        for node in tree.non_terminal_nodes() {
            let disc_here = p.discount(node.t) * prices.get(node);
            let disc_next = p.discount(node.t + 1) * tree.expect_children(&prices, node);
            assert!(
                (disc_here - disc_next).abs() <= 1e-12 * disc_here.abs(),
                "martingale check failed at {node:?}"
            );
        }
    }

    #[test]
    fn node_addressing_roundtrip() {
        for depth in 0..6 {
            for idx in 0..1usize << depth {
                let node = NodeId { t: depth, idx };
                assert_eq!(NodeId::from_signs(&node.signs()), node);
            }
        }
    }

    #[test]
    fn dfs_order_is_consistent() {
        for depth in 0..5 {
            let order = dfs_nodes(depth);
            assert_eq!(order.len(), (1 << (depth + 1)) - 1);
            for (rank, node) in order.iter().enumerate() {
                assert_eq!(dfs_rank(*node, depth), rank, "node {node:?}");
            }
        }
        // Spot check the documented order at depth 2: root, +, ++, +-, -, -+, --
        let order = dfs_nodes(2);
        let signs: Vec<Vec<Sign>> = order.iter().map(|n| n.signs()).collect();
        assert_eq!(
            signs,
            vec![
                vec![],
                vec![1],
                vec![1, 1],
                vec![1, -1],
                vec![-1],
                vec![-1, 1],
                vec![-1, -1],
            ]
        );
    }

    #[test]
    fn path_probabilities_sum_to_one() {
        let tree = EventTree::new(
            3,
            vec![
                vec![0.3],
                vec![0.5, 0.7],
                vec![0.2, 0.4, 0.6, 0.8],
            ],
        )
        .unwrap();
        let total: f64 = tree.paths().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-14);
        for (node, pr) in tree.paths() {
            assert!(close(tree.path_prob(node), pr, 1e-14));
        }
    }

    #[test]
    fn event_tree_rejects_degenerate_probs() {
        assert!(EventTree::homogeneous(2, 0.0).is_err());
        assert!(EventTree::homogeneous(2, 1.0).is_err());
    }
}
