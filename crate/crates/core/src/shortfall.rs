//! The seller's shortfall risk for a game option hedged from an initial
//! capital `x`: the infimum over cancellation times and admissible
//! self-financing allocations of the worst expected discounted shortfall
//! over buyer exercise times.
//!
//! Allocations are restricted to per-node candidate lists spanning the
//! no-bankruptcy interval (plus the replication coefficient of the game
//! value, so a fully funded seller can hedge perfectly).  Three
//! evaluators share that strategy family: a literal brute-force
//! enumeration (the oracle, tiny trees only), a wealth-grid dynamic
//! program with linear interpolation (scales to deeper trees), and an
//! exact piecewise-linear dynamic program in the wealth variable.

use crate::dynkin;
use crate::error::{Error, Result};
use crate::game_option::GameOptionInstance;
use crate::tree::{Adapted, EventTree, NodeId};

/// Grid and candidate-list configuration.
#[derive(Clone, Copy, Debug)]
pub struct ShortfallConfig {
    /// Wealth grid points over `[0, 2 * max discounted payoff]`.
    pub wealth_points: usize,
    /// Evenly spaced allocation candidates per node.
    pub gamma_points: usize,
    /// Add the replication coefficient of the game value to every node's
    /// candidate list.
    pub include_replication: bool,
}

impl Default for ShortfallConfig {
    fn default() -> Self {
        ShortfallConfig {
            wealth_points: 401,
            gamma_points: 101,
            include_replication: true,
        }
    }
}

/// A shortfall-risk problem in discounted units.
#[derive(Clone, Debug)]
pub struct ShortfallProblem {
    pub tree: EventTree,
    pub stock: Adapted,
    /// Discounted cancellation payoff.
    pub upper: Adapted,
    /// Discounted exercise payoff.
    pub lower: Adapted,
    pub capital: f64,
    /// Wealth domain `[0, wealth_hi]`.
    pub wealth_hi: f64,
    pub wealth_points: usize,
    /// Allocation candidates per non-terminal node, sorted.
    pub gamma_candidates: Adapted<Vec<f64>>,
    /// Max discounted payoff magnitude, cached for slack scaling.
    scale: f64,
}

impl ShortfallProblem {
    /// Build from a game-option instance; everything is discounted here.
    pub fn from_instance(
        instance: &GameOptionInstance,
        capital: f64,
        cfg: &ShortfallConfig,
    ) -> Result<Self> {
        if !(capital >= 0.0) || !capital.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "capital must be nonnegative, got {capital}"
            )));
        }
        if cfg.wealth_points < 2 || cfg.gamma_points < 2 {
            return Err(Error::InvalidParameter(
                "need at least two wealth and gamma grid points".into(),
            ));
        }
        let (upper, lower) = instance.discounted();
        let stock = instance
            .prices
            .map(|node, v| instance.params.discount(node.t) * v);
        let tree = instance.tree.clone();
        let max_pay = upper.max_abs().max(lower.max_abs());
        let wealth_hi = 2.0 * max_pay.max(f64::MIN_POSITIVE);
        if capital > wealth_hi {
            return Err(Error::InvalidParameter(format!(
                "capital {capital} exceeds the wealth domain bound {wealth_hi}"
            )));
        }
        let n = tree.depth();
        let replication = if cfg.include_replication {
            let dynkin = instance.dynkin()?;
            Some(dynkin::solve_dp(&dynkin)?.values)
        } else {
            None
        };
        let gamma_candidates = Adapted::from_fn(n.saturating_sub(1), |node| {
            let du = stock.get(node.up()) - stock.get(node);
            let dd = stock.get(node.down()) - stock.get(node);
            let lo = -wealth_hi / du;
            let hi = wealth_hi / (-dd);
            let mut cands: Vec<f64> = (0..cfg.gamma_points)
                .map(|i| lo + (hi - lo) * i as f64 / (cfg.gamma_points - 1) as f64)
                .collect();
            cands.push(0.0);
            if let Some(values) = &replication {
                cands.push((values.get(node.up()) - values.get(node.down())) / (du - dd));
            }
            cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cands.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(1.0));
            cands
        });
        Ok(ShortfallProblem {
            tree,
            stock,
            upper,
            lower,
            capital,
            wealth_hi,
            wealth_points: cfg.wealth_points,
            gamma_candidates,
            scale: max_pay,
        })
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn price_moves(&self, node: NodeId) -> (f64, f64) {
        let s = *self.stock.get(node);
        (
            *self.stock.get(node.up()) - s,
            *self.stock.get(node.down()) - s,
        )
    }

    /// Allocation candidates keeping both children's wealth nonnegative.
    fn admissible(&self, node: NodeId, wealth: f64) -> impl Iterator<Item = f64> + '_ {
        let (du, dd) = self.price_moves(node);
        let tol = 1e-12 * self.scale().max(1.0);
        self.gamma_candidates
            .get(node)
            .iter()
            .cloned()
            .filter(move |g| wealth + g * du >= -tol && wealth + g * dd >= -tol)
    }
}

/// Result of a shortfall evaluation.
#[derive(Clone, Debug)]
pub struct ShortfallReport {
    /// `R(x)` at the problem's capital.
    pub risk: f64,
    /// The root risk curve: `(wealth, risk)` samples (grid points or exact
    /// knots depending on the backend).
    pub root_curve: Vec<(f64, f64)>,
    /// Wealth values clamped to the grid boundary (grid backend only).
    pub clamped: u64,
}

/// Dynamic-programming backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DpBackend {
    /// Wealth grid with linear interpolation; scales to deeper trees.
    Grid,
    /// Exact piecewise-linear wealth functions; small trees and candidate
    /// lists, no interpolation error.
    Exact,
}

// ---------------------------------------------------------------------------
// Brute force

/// Literal brute force: enumerate every cancellation rule and every
/// assignment of allocation candidates to the nodes the seller can still
/// trade at, roll the wealth forward, and take the worst enumerated buyer
/// response.  Exact on the candidate grid.
pub fn shortfall_brute(
    problem: &ShortfallProblem,
    max_depth: usize,
    max_tables: u128,
) -> Result<f64> {
    let n = problem.depth();
    if n > max_depth {
        return Err(Error::EnumerationTooLarge {
            size: n as u128,
            bound: max_depth as u128,
        });
    }
    let tables: u128 = problem
        .tree
        .non_terminal_nodes()
        .map(|node| problem.gamma_candidates.get(node).len() as u128)
        .product();
    if tables > max_tables {
        return Err(Error::EnumerationTooLarge {
            size: tables,
            bound: max_tables,
        });
    }
    let sigmas = dynkin::enumerate_rules(n, max_depth)?;
    let taus = &sigmas;
    let paths = problem.tree.paths();

    let mut best = f64::INFINITY;
    for sigma in &sigmas {
        let mut wealth = Adapted::constant(n, f64::NAN);
        wealth.set(NodeId::ROOT, problem.capital);
        let sigma_stops: Vec<usize> = paths.iter().map(|&(tm, _)| sigma.stop_time(tm)).collect();

        // Nodes where the seller still trades: strict ancestors of the
        // cancellation antichain, in preorder so parents are assigned
        // before children.  Allocations below the antichain never affect
        // W_{sigma /\ tau}.
        let mut trading: Vec<NodeId> = Vec::new();
        {
            fn collect(sigma: &dynkin::StoppingRule, node: NodeId, n: usize, out: &mut Vec<NodeId>) {
                if node.t == n || sigma.flag(node) {
                    return;
                }
                out.push(node);
                collect(sigma, node.up(), n, out);
                collect(sigma, node.down(), n, out);
            }
            collect(sigma, NodeId::ROOT, n, &mut trading);
        }

        #[allow(clippy::too_many_arguments)]
        fn rec(
            problem: &ShortfallProblem,
            trading: &[NodeId],
            i: usize,
            wealth: &mut Adapted,
            paths: &[(NodeId, f64)],
            sigma_stops: &[usize],
            taus: &[dynkin::StoppingRule],
            best: &mut f64,
        ) {
            if i == trading.len() {
                let v = worst_buyer_response(problem, wealth, paths, sigma_stops, taus);
                if v < *best {
                    *best = v;
                }
                return;
            }
            let node = trading[i];
            let w = *wealth.get(node);
            let (du, dd) = problem.price_moves(node);
            let cands: Vec<f64> = problem.admissible(node, w).collect();
            for g in cands {
                wealth.set(node.up(), w + g * du);
                wealth.set(node.down(), w + g * dd);
                rec(
                    problem,
                    trading,
                    i + 1,
                    wealth,
                    paths,
                    sigma_stops,
                    taus,
                    best,
                );
            }
        }
        rec(
            problem,
            &trading,
            0,
            &mut wealth,
            &paths,
            &sigma_stops,
            taus,
            &mut best,
        );
    }
    Ok(best)
}

/// Worst expected discounted shortfall over enumerated buyer rules, for a
/// fixed cancellation rule and wealth rollout.
fn worst_buyer_response(
    problem: &ShortfallProblem,
    wealth: &Adapted,
    paths: &[(NodeId, f64)],
    sigma_stops: &[usize],
    taus: &[dynkin::StoppingRule],
) -> f64 {
    let n = problem.depth();
    // shortfall if the buyer exercises at time t on path p
    let mut sf = vec![vec![0.0f64; n + 1]; paths.len()];
    for (p, &(terminal, _)) in paths.iter().enumerate() {
        let s = sigma_stops[p];
        for t in 0..=n {
            let m = s.min(t);
            let pay = if s < t {
                *problem.upper.get(terminal.ancestor(s))
            } else {
                *problem.lower.get(terminal.ancestor(t))
            };
            let w = *wealth.get(terminal.ancestor(m));
            sf[p][t] = (pay - w).max(0.0);
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for tau in taus {
        let mut e = 0.0;
        for (p, &(terminal, prob)) in paths.iter().enumerate() {
            e += prob * sf[p][tau.stop_time(terminal)];
        }
        worst = worst.max(e);
    }
    worst
}

// ---------------------------------------------------------------------------
// Wealth-grid dynamic program

/// Shortfall risk via the wealth-grid recursion
/// `J_t = min((X - w)^+, max((Y - w)^+, min_gamma E[J_{t+1}(w')]))`
/// with linear interpolation in the wealth variable, or exactly with
/// piecewise-linear wealth functions.
pub fn shortfall_dp(problem: &ShortfallProblem, backend: DpBackend) -> Result<ShortfallReport> {
    match backend {
        DpBackend::Grid => dp_grid(problem),
        DpBackend::Exact => dp_exact(problem),
    }
}

fn dp_grid(problem: &ShortfallProblem) -> Result<ShortfallReport> {
    let n = problem.depth();
    let m = problem.wealth_points;
    let hi = problem.wealth_hi;
    let step = hi / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|i| i as f64 * step).collect();
    let mut clamped: u64 = 0;

    // J per node at the current level
    let mut next: Vec<Vec<f64>> = (0..1usize << n)
        .map(|idx| {
            let node = NodeId { t: n, idx };
            let y = *problem.lower.get(node);
            grid.iter().map(|&w| (y - w).max(0.0)).collect()
        })
        .collect();
    for t in (0..n).rev() {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(1 << t);
        for idx in 0..1usize << t {
            let node = NodeId { t, idx };
            let (du, dd) = problem.price_moves(node);
            let p = problem.tree.p_up(node);
            let ju = &next[2 * idx + 1];
            let jd = &next[2 * idx];
            let x = *problem.upper.get(node);
            let y = *problem.lower.get(node);
            let mut row = Vec::with_capacity(m);
            for &w in &grid {
                let cancel = (x - w).max(0.0);
                let exercise = (y - w).max(0.0);
                let mut cont = f64::INFINITY;
                for g in problem.admissible(node, w) {
                    let eu = interp(ju, step, hi, w + g * du, &mut clamped);
                    let ed = interp(jd, step, hi, w + g * dd, &mut clamped);
                    cont = cont.min(p * eu + (1.0 - p) * ed);
                }
                row.push(cancel.min(exercise.max(cont)));
            }
            cur.push(row);
        }
        next = cur;
    }
    if clamped > 0 {
        log::warn!("shortfall grid DP clamped {clamped} wealth values to the domain boundary");
    }
    let root = &next[0];
    let mut c2 = 0;
    let risk = interp(root, step, hi, problem.capital, &mut c2);
    Ok(ShortfallReport {
        risk,
        root_curve: grid.iter().cloned().zip(root.iter().cloned()).collect(),
        clamped,
    })
}

fn interp(row: &[f64], step: f64, hi: f64, w: f64, clamped: &mut u64) -> f64 {
    if w >= hi {
        if w > hi {
            *clamped += 1;
        }
        return row[row.len() - 1];
    }
    if w <= 0.0 {
        return row[0];
    }
    let pos = w / step;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= row.len() {
        return row[row.len() - 1];
    }
    row[i] * (1.0 - frac) + row[i + 1] * frac
}

// ---------------------------------------------------------------------------
// Exact piecewise-linear dynamic program

/// Piecewise-linear function on `[0, hi]` stored as knots; evaluation
/// clamps the argument into the domain (the value is constant beyond the
/// last knot, which is exact for the shortfall functions because they
/// vanish above the payoff bound).
#[derive(Clone, Debug)]
struct WealthFn {
    xs: Vec<f64>,
    vs: Vec<f64>,
}

impl WealthFn {
    fn leg(c: f64, hi: f64) -> WealthFn {
        // (c - w)^+ on [0, hi]
        if c <= 0.0 {
            WealthFn {
                xs: vec![0.0, hi],
                vs: vec![0.0, 0.0],
            }
        } else if c >= hi {
            WealthFn {
                xs: vec![0.0, hi],
                vs: vec![c, c - hi],
            }
        } else {
            WealthFn {
                xs: vec![0.0, c, hi],
                vs: vec![c, 0.0, 0.0],
            }
        }
    }

    fn eval(&self, w: f64) -> f64 {
        let w = w.clamp(self.xs[0], *self.xs.last().unwrap());
        let i = match self
            .xs
            .binary_search_by(|x| x.partial_cmp(&w).unwrap())
        {
            Ok(i) => return self.vs[i],
            Err(i) => i,
        };
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (v0, v1) = (self.vs[i - 1], self.vs[i]);
        v0 + (v1 - v0) * (w - x0) / (x1 - x0)
    }

    fn canonical(&self) -> WealthFn {
        let mut xs = vec![self.xs[0]];
        let mut vs = vec![self.vs[0]];
        for i in 1..self.xs.len() - 1 {
            let sl = (self.vs[i] - vs[vs.len() - 1]) / (self.xs[i] - xs[xs.len() - 1]);
            let sr = (self.vs[i + 1] - self.vs[i]) / (self.xs[i + 1] - self.xs[i]);
            if (sl - sr).abs() > 1e-12 * sl.abs().max(sr.abs()).max(1.0) {
                xs.push(self.xs[i]);
                vs.push(self.vs[i]);
            }
        }
        xs.push(*self.xs.last().unwrap());
        vs.push(*self.vs.last().unwrap());
        WealthFn { xs, vs }
    }

    fn combine(&self, other: &WealthFn, take_min: bool) -> WealthFn {
        let mut grid: Vec<f64> = self.xs.iter().chain(other.xs.iter()).cloned().collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(1.0));
        let mut xs = Vec::with_capacity(grid.len() * 2);
        for i in 0..grid.len() {
            xs.push(grid[i]);
            if i + 1 < grid.len() {
                // crossing of the two affine pieces
                let (a, b) = (grid[i], grid[i + 1]);
                let (f0, f1) = (self.eval(a), self.eval(b));
                let (g0, g1) = (other.eval(a), other.eval(b));
                let (d0, d1) = (f0 - g0, f1 - g1);
                if d0 * d1 < 0.0 {
                    xs.push(a + (b - a) * d0 / (d0 - d1));
                }
            }
        }
        let pick = |a: f64, b: f64| if take_min { a.min(b) } else { a.max(b) };
        let vs: Vec<f64> = xs.iter().map(|&x| pick(self.eval(x), other.eval(x))).collect();
        WealthFn { xs, vs }.canonical()
    }
}

fn dp_exact(problem: &ShortfallProblem) -> Result<ShortfallReport> {
    let n = problem.depth();
    let hi = problem.wealth_hi;
    const MAX_KNOTS: usize = 200_000;
    // The shortfall is nonnegative, and knot values within double-rounding
    // of zero are artifacts of evaluating at a kink; snap them so the
    // zero region stays exact.
    let dust = 1e-14 * problem.scale().max(f64::MIN_POSITIVE);
    let snap = |f: WealthFn| -> WealthFn {
        WealthFn {
            xs: f.xs,
            vs: f
                .vs
                .into_iter()
                .map(|v| if v.abs() <= dust { 0.0 } else { v.max(0.0) })
                .collect(),
        }
    };

    let mut next: Vec<WealthFn> = (0..1usize << n)
        .map(|idx| WealthFn::leg(*problem.lower.get(NodeId { t: n, idx }), hi))
        .collect();
    for t in (0..n).rev() {
        let mut cur: Vec<WealthFn> = Vec::with_capacity(1 << t);
        for idx in 0..1usize << t {
            let node = NodeId { t, idx };
            let (du, dd) = problem.price_moves(node);
            let p = problem.tree.p_up(node);
            let ju = &next[2 * idx + 1];
            let jd = &next[2 * idx];
            // branch per candidate: valid from the no-bankruptcy boundary
            let mut branches: Vec<(f64, WealthFn)> = Vec::new();
            for &g in problem.gamma_candidates.get(node) {
                let valid_from = (-g * du).max(-g * dd).max(0.0);
                if valid_from > hi {
                    continue;
                }
                // knots of w -> p ju(w + g du) + q jd(w + g dd)
                let mut xs: Vec<f64> = vec![0.0, hi, valid_from];
                for k in ju.xs.iter() {
                    xs.push(k - g * du);
                }
                for k in jd.xs.iter() {
                    xs.push(k - g * dd);
                }
                xs.retain(|&x| (0.0..=hi).contains(&x));
                xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(1.0));
                let vs: Vec<f64> = xs
                    .iter()
                    .map(|&w| p * ju.eval(w + g * du) + (1.0 - p) * jd.eval(w + g * dd))
                    .collect();
                branches.push((valid_from, WealthFn { xs, vs }.canonical()));
            }
            let cont = envelope(&branches, hi);
            let cancel = WealthFn::leg(*problem.upper.get(node), hi);
            let exercise = WealthFn::leg(*problem.lower.get(node), hi);
            let j = snap(cancel.combine(&exercise.combine(&cont, false), true));
            if j.xs.len() > MAX_KNOTS {
                return Err(Error::EnumerationTooLarge {
                    size: j.xs.len() as u128,
                    bound: MAX_KNOTS as u128,
                });
            }
            cur.push(j);
        }
        next = cur;
    }
    let root = &next[0];
    Ok(ShortfallReport {
        risk: root.eval(problem.capital),
        root_curve: root.xs.iter().cloned().zip(root.vs.iter().cloned()).collect(),
        clamped: 0,
    })
}

/// Lower envelope of validity-restricted branches on `[0, hi]`.
///
/// Every branch is affine between grid points (all branch knots and
/// validity boundaries are in the grid), so on each cell the envelope is
/// a lower envelope of lines, refined recursively at winner crossings.
fn envelope(branches: &[(f64, WealthFn)], hi: f64) -> WealthFn {
    debug_assert!(!branches.is_empty());
    let mut grid: Vec<f64> = vec![0.0, hi];
    for (vf, b) in branches {
        grid.push(*vf);
        grid.extend_from_slice(&b.xs);
    }
    grid.retain(|&x| (0.0..=hi).contains(&x));
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * a.abs().max(1.0));

    let mut xs: Vec<f64> = Vec::new();
    let mut vs: Vec<f64> = Vec::new();
    let tol = 1e-12 * hi.max(1.0);
    for win in grid.windows(2) {
        let (a, b) = (win[0], win[1]);
        let valid: Vec<&WealthFn> = branches
            .iter()
            .filter(|(vf, _)| *vf <= a + tol)
            .map(|(_, f)| f)
            .collect();
        if valid.is_empty() {
            // no admissible allocation on this cell; cannot happen when 0
            // is a candidate, but keep a best-effort fallback
            continue;
        }
        refine_cell(&valid, a, b, &mut xs, &mut vs, 0);
    }
    // close the last point
    let last_x = *grid.last().unwrap();
    let valid: Vec<&WealthFn> = branches
        .iter()
        .filter(|(vf, _)| *vf <= last_x + tol)
        .map(|(_, f)| f)
        .collect();
    let v = valid
        .iter()
        .map(|f| f.eval(last_x))
        .fold(f64::INFINITY, f64::min);
    xs.push(last_x);
    vs.push(v);
    WealthFn { xs, vs }.canonical()
}

fn refine_cell(
    valid: &[&WealthFn],
    a: f64,
    b: f64,
    xs: &mut Vec<f64>,
    vs: &mut Vec<f64>,
    depth: usize,
) {
    let eval_min = |w: f64| -> (usize, f64) {
        let mut bi = 0;
        let mut bv = f64::INFINITY;
        for (i, f) in valid.iter().enumerate() {
            let v = f.eval(w);
            if v < bv {
                bv = v;
                bi = i;
            }
        }
        (bi, bv)
    };
    let (wa, va) = eval_min(a);
    let (wb, vb) = eval_min(b);
    // Same winner at both ends: by concavity of a min of lines, the winner
    // spans the cell.
    if wa == wb || depth > 60 || (b - a) <= 1e-13 * b.abs().max(1.0) {
        xs.push(a);
        vs.push(va);
        return;
    }
    // crossing of the two winning lines
    let fa = &valid[wa];
    let fb = &valid[wb];
    let (d0, d1) = (fa.eval(a) - fb.eval(a), fa.eval(b) - fb.eval(b));
    let cross = if (d0 - d1).abs() > 0.0 {
        a + (b - a) * d0 / (d0 - d1)
    } else {
        0.5 * (a + b)
    };
    let cross = cross.clamp(a, b);
    if cross <= a || cross >= b {
        xs.push(a);
        vs.push(va);
        let _ = vb;
        return;
    }
    refine_cell(valid, a, cross, xs, vs, depth + 1);
    refine_cell(valid, cross, b, xs, vs, depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_option::{self, GameOptionInstance};
    use crate::payoff::PayoffSpec;
    use crate::tree::CrrParams;

    /// One-period 0.05-penalty call: s0 = 1, up = 0.2, down = -0.2, r = 0.
    fn small_call() -> GameOptionInstance {
        let params = CrrParams::new(1.0, 0.2, -0.2, 0.0, 1).unwrap();
        let payoff = PayoffSpec::VanillaCall {
            strike: 1.0,
            penalty: 0.05,
        };
        GameOptionInstance::build(params, &payoff, 1.0).unwrap()
    }

    fn coarse_cfg() -> ShortfallConfig {
        ShortfallConfig {
            wealth_points: 2001,
            gamma_points: 5,
            include_replication: true,
        }
    }

    #[test]
    fn hand_value_at_x_003() {
        // Hand minimax: cancelling immediately costs (0.05 - 0.03)^+ = 0.02;
        // holding to maturity costs 0.07 for any allocation, so R = 0.02.
        let inst = small_call();
        let problem = ShortfallProblem::from_instance(&inst, 0.03, &coarse_cfg()).unwrap();
        let brute = shortfall_brute(&problem, 3, 1 << 20).unwrap();
        assert!((brute - 0.02).abs() < 1e-12, "brute {brute}");
        let exact = shortfall_dp(&problem, DpBackend::Exact).unwrap();
        assert!((exact.risk - 0.02).abs() < 1e-12, "exact {}", exact.risk);
        let grid = shortfall_dp(&problem, DpBackend::Grid).unwrap();
        assert!((grid.risk - 0.02).abs() < 1e-6, "grid {}", grid.risk);
    }

    #[test]
    fn fully_funded_seller_has_zero_risk() {
        let inst = small_call();
        let v = game_option::price(&inst).unwrap().value;
        let problem = ShortfallProblem::from_instance(&inst, v, &coarse_cfg()).unwrap();
        let exact = shortfall_dp(&problem, DpBackend::Exact).unwrap();
        assert_eq!(exact.risk, 0.0);
        let brute = shortfall_brute(&problem, 3, 1 << 20).unwrap();
        assert_eq!(brute, 0.0);
        // and zero beyond the price along the whole curve
        for (w, r) in &exact.root_curve {
            if *w >= v {
                assert_eq!(*r, 0.0, "at wealth {w}");
            }
        }
    }

    #[test]
    fn risk_is_bounded_and_monotone() {
        let params = CrrParams::new(1.0, 0.3, -0.25, 0.02, 3).unwrap();
        let payoff = PayoffSpec::VanillaPut {
            strike: 1.1,
            penalty: 0.04,
        };
        let inst = GameOptionInstance::build(params, &payoff, 1.0).unwrap();
        let problem = ShortfallProblem::from_instance(&inst, 0.0, &coarse_cfg()).unwrap();
        let max_pay = problem.scale();
        let report = shortfall_dp(&problem, DpBackend::Exact).unwrap();
        assert!(report.risk >= 0.0 && report.risk <= max_pay);
        let mut prev = f64::INFINITY;
        for (_, r) in &report.root_curve {
            assert!(*r <= prev + 1e-12);
            prev = *r;
        }
    }

    #[test]
    fn exact_dp_matches_brute_force() {
        let params = CrrParams::new(1.0, 0.25, -0.2, 0.01, 2).unwrap();
        let payoff = PayoffSpec::VanillaPut {
            strike: 1.05,
            penalty: 0.03,
        };
        let inst = GameOptionInstance::build(params, &payoff, 1.0).unwrap();
        for &x in &[0.0, 0.01, 0.03, 0.08] {
            let problem = ShortfallProblem::from_instance(&inst, x, &coarse_cfg()).unwrap();
            let brute = shortfall_brute(&problem, 3, 1 << 22).unwrap();
            let exact = shortfall_dp(&problem, DpBackend::Exact).unwrap().risk;
            assert!(
                (brute - exact).abs() <= 1e-11 * problem.scale().max(1.0),
                "x={x}: brute {brute} vs exact {exact}"
            );
            let grid = shortfall_dp(&problem, DpBackend::Grid).unwrap().risk;
            assert!(
                (grid - exact).abs() <= 2e-3 * problem.scale(),
                "x={x}: grid {grid} vs exact {exact}"
            );
        }
    }
}
