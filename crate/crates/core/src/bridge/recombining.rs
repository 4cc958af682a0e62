//! Recombining-lattice fast paths for Markov payoffs.
//!
//! The generic pricer walks the full non-recombining tree and is
//! exponential in the step count.  Payoffs that declare themselves Markov
//! in the current price collapse to an `O(n^2)` lattice; the Russian
//! payoff (running maximum with a floor at or below the initial price) is
//! linear in the price and collapses to the max/price ratio, whose state
//! lives on an `O(n^2)`-per-level lattice indexed by the signed step
//! counts since the last fresh maximum.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::payoff::{MarkovClass, PathPayoff, PayoffSpec};
use crate::tree::BsDiscretization;

/// Value arrays plus exercise/hedge tables of a price-only lattice.
#[derive(Clone, Debug)]
pub struct PriceOnlyLattice {
    pub disc: BsDiscretization,
    pub spot: f64,
    pub value: f64,
    /// `stop_seller[k][j]`: the cancellation contact set.
    pub stop_seller: Vec<Vec<bool>>,
    pub stop_buyer: Vec<Vec<bool>>,
    /// Shares over the step `k -> k+1` at state `(k, j)`, `k < n`.
    pub gamma: Vec<Vec<f64>>,
    /// Bond units over the step `k -> k+1` at state `(k, j)`.
    pub beta: Vec<Vec<f64>>,
    /// Undiscounted value per state (needed to freeze wealth at a stop).
    pub values: Vec<Vec<f64>>,
}

/// Price at state `(k, j)`: `j` up-moves out of `k`.
pub fn lattice_price(disc: &BsDiscretization, spot: f64, k: usize, j: usize) -> f64 {
    spot * (1.0 + disc.step_up).powi(j as i32) * (1.0 + disc.step_down).powi((k - j) as i32)
}

/// Value a price-only payoff on the recombining lattice; tables are built
/// only when `with_tables` is set (quadratic memory).
pub fn price_only_lattice(
    payoff: &PayoffSpec,
    disc: &BsDiscretization,
    spot: f64,
    with_tables: bool,
) -> Result<PriceOnlyLattice> {
    if payoff.markov_class() != MarkovClass::PriceOnly {
        return Err(Error::InvalidParameter(
            "payoff does not declare itself Markov in the current price".into(),
        ));
    }
    let n = disc.steps;
    let dt = disc.dt();
    let r1 = 1.0 / (1.0 + disc.step_rate);
    let p = disc.prob_up;
    // payoff legs via a single-point path slice
    let leg = |k: usize, s: f64| -> (f64, f64) {
        let times = [k as f64 * dt];
        let prices = [s];
        let slice = crate::payoff::PathSlice::new(&times, &prices);
        (payoff.holder(&slice), payoff.penalty(&slice))
    };

    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut scale = 0.0f64;
    let mut next: Vec<f64> = (0..=n)
        .map(|j| {
            let (f, _) = leg(n, lattice_price(disc, spot, n, j));
            scale = scale.max(f.abs());
            f
        })
        .collect();
    if with_tables {
        values.resize(n + 1, Vec::new());
        values[n] = next.clone();
    }
    for k in (0..n).rev() {
        let cur: Vec<f64> = (0..=k)
            .map(|j| {
                let s = lattice_price(disc, spot, k, j);
                let (f, pen) = leg(k, s);
                let cont = r1 * (p * next[j + 1] + (1.0 - p) * next[j]);
                (f + pen).min(f.max(cont))
            })
            .collect();
        if with_tables {
            values[k] = cur.clone();
        }
        for v in &cur {
            scale = scale.max(v.abs());
        }
        next = cur;
    }
    let value = next[0];
    let mut lattice = PriceOnlyLattice {
        disc: *disc,
        spot,
        value,
        stop_seller: Vec::new(),
        stop_buyer: Vec::new(),
        gamma: Vec::new(),
        beta: Vec::new(),
        values,
    };
    if with_tables {
        let slack = 1e-9 * scale.max(1e-300);
        for k in 0..=n {
            let mut ss = Vec::with_capacity(k + 1);
            let mut sb = Vec::with_capacity(k + 1);
            for j in 0..=k {
                let s = lattice_price(disc, spot, k, j);
                let (f, pen) = leg(k, s);
                let x = if k == n { f } else { f + pen };
                let v = lattice.values[k][j];
                ss.push((x - v).abs() <= slack);
                sb.push((v - f).abs() <= slack);
            }
            lattice.stop_seller.push(ss);
            lattice.stop_buyer.push(sb);
        }
        for k in 0..n {
            let disc_k = (1.0 + disc.step_rate).powi(-(k as i32));
            let mut g = Vec::with_capacity(k + 1);
            let mut b = Vec::with_capacity(k + 1);
            for j in 0..=k {
                let su = lattice_price(disc, spot, k + 1, j + 1);
                let sd = lattice_price(disc, spot, k + 1, j);
                let gamma = (lattice.values[k + 1][j + 1] - lattice.values[k + 1][j]) / (su - sd);
                let s = lattice_price(disc, spot, k, j);
                // wealth along the perfect hedge equals the value
                let beta = (lattice.values[k][j] - gamma * s) * disc_k;
                g.push(gamma);
                b.push(beta);
            }
            lattice.gamma.push(g);
            lattice.beta.push(b);
        }
    }
    Ok(lattice)
}

/// State lattice of the Russian payoff: per level, the reachable states
/// are `(0, 0)` (at a fresh maximum) and pairs `(c, d)` with
/// `1 <= c <= d <= k`, `c = d (mod 2)`, where the max/price ratio is
/// `exp(c kappa sqrt(T/n) - d rT/n)`.
#[derive(Clone, Debug)]
pub struct RatioLattice {
    pub disc: BsDiscretization,
    pub spot: f64,
    pub pen_rate: f64,
    pub value: f64,
    /// Normalized values `v` with `V = S * v`, per level (only when built
    /// with tables).
    pub values: Vec<Vec<f64>>,
    pub stop_seller: Vec<Vec<bool>>,
    pub stop_buyer: Vec<Vec<bool>>,
    /// Shares per state; price-free.
    pub gamma: Vec<Vec<f64>>,
    /// Bond units = `beta_coef * S_k`, per state.
    pub beta_coef: Vec<Vec<f64>>,
}

/// Flat index of `(c, d)` at level `k`: state 0 is `(0, 0)`, then for
/// `c >= 1` the entries `d = c, c+2, ..., <= k`.
#[derive(Clone, Copy, Debug)]
pub struct RatioIndexer {
    k: usize,
}

impl RatioIndexer {
    pub fn new(k: usize) -> Self {
        RatioIndexer { k }
    }

    /// `sum_{j=0..=t} floor(j/2) = floor(t^2 / 4)`
    fn halves_prefix(t: usize) -> usize {
        t * t / 4
    }

    pub fn len(&self) -> usize {
        // 1 + sum_{c=1..k} (floor((k - c)/2) + 1)
        let k = self.k;
        1 + k + Self::halves_prefix(k.saturating_sub(1))
    }

    pub fn index(&self, c: usize, d: usize) -> usize {
        debug_assert!(c <= d && d <= self.k && (d - c) % 2 == 0);
        if c == 0 {
            return 0;
        }
        // offset of block c: 1 + sum_{c'=1..c-1} (floor((k - c')/2) + 1),
        // with the sum of floors in closed form
        let k = self.k;
        let floors = Self::halves_prefix(k.saturating_sub(1)) - Self::halves_prefix(k - c);
        let offset = 1 + (c - 1) + floors;
        offset + (d - c) / 2
    }

    /// Enumerate `(c, d)` pairs in index order.
    pub fn states(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.len());
        out.push((0, 0));
        for c in 1..=self.k {
            let mut d = c;
            while d <= self.k {
                out.push((c, d));
                d += 2;
            }
        }
        out
    }
}

/// Value the Russian payoff `F = max(floor, running max)`, penalty
/// `pen_rate * S_t`, by the homogeneous ratio recursion.  Requires
/// `floor <= spot` so the running max dominates the floor everywhere.
pub fn russian_lattice(
    floor: f64,
    pen_rate: f64,
    disc: &BsDiscretization,
    spot: f64,
    with_tables: bool,
) -> Result<RatioLattice> {
    if floor > spot {
        return Err(Error::InvalidParameter(format!(
            "the ratio lattice needs floor <= spot, got floor={floor}, spot={spot}"
        )));
    }
    let n = disc.steps;
    let kd = disc.log_step();
    let rtn = disc.rate * disc.dt();
    let r1 = 1.0 / (1.0 + disc.step_rate);
    let p = disc.prob_up;
    let up1 = 1.0 + disc.step_up;
    let down1 = 1.0 + disc.step_down;
    let psi = |c: usize, d: usize| (c as f64 * kd - d as f64 * rtn).exp();
    // transition of (c, d): up shrinks the ratio, down grows it; the floor
    // at a fresh maximum resets to (0, 0)
    let step_up_state = |c: usize, d: usize| -> (usize, usize) {
        if c == 0 {
            return (0, 0);
        }
        let (c2, d2) = (c - 1, d + 1);
        if c2 == 0 || (c2 as f64 * kd) <= (d2 as f64 * rtn) {
            (0, 0)
        } else {
            (c2, d2)
        }
    };
    let step_down_state = |c: usize, d: usize| -> (usize, usize) {
        let (c2, d2) = (c + 1, d + 1);
        if (c2 as f64 * kd) <= (d2 as f64 * rtn) {
            (0, 0)
        } else {
            (c2, d2)
        }
    };

    let idx_n = RatioIndexer::new(n);
    let mut next: Vec<f64> = idx_n
        .states()
        .iter()
        .map(|&(c, d)| psi(c, d))
        .collect();
    let mut values: Vec<Vec<f64>> = Vec::new();
    if with_tables {
        values.resize(n + 1, Vec::new());
        values[n] = next.clone();
    }
    for k in (0..n).rev() {
        let indexer = RatioIndexer::new(k);
        let child = RatioIndexer::new(k + 1);
        let states = indexer.states();
        let cur: Vec<f64> = states
            .par_iter()
            .map(|&(c, d)| {
                let (cu, du) = step_up_state(c, d);
                let (cd, dd) = step_down_state(c, d);
                let vu = next[child.index(cu, du)];
                let vd = next[child.index(cd, dd)];
                let cont = r1 * (p * up1 * vu + (1.0 - p) * down1 * vd);
                let ratio = psi(c, d);
                (ratio + pen_rate).min(ratio.max(cont))
            })
            .collect();
        if with_tables {
            values[k] = cur.clone();
        }
        next = cur;
    }
    let value = spot * next[0];
    let mut lattice = RatioLattice {
        disc: *disc,
        spot,
        pen_rate,
        value,
        values: Vec::new(),
        stop_seller: Vec::new(),
        stop_buyer: Vec::new(),
        gamma: Vec::new(),
        beta_coef: Vec::new(),
    };
    if with_tables {
        // scale in ratio units
        let scale: f64 = values
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let slack = 1e-9 * scale.max(1e-300);
        for k in 0..=n {
            let indexer = RatioIndexer::new(k);
            let states = indexer.states();
            let mut ss = Vec::with_capacity(states.len());
            let mut sb = Vec::with_capacity(states.len());
            for &(c, d) in &states {
                let ratio = psi(c, d);
                let v = values[k][indexer.index(c, d)];
                let x = if k == n { ratio } else { ratio + pen_rate };
                ss.push((x - v).abs() <= slack);
                sb.push((v - ratio).abs() <= slack);
            }
            lattice.stop_seller.push(ss);
            lattice.stop_buyer.push(sb);
        }
        for k in 0..n {
            let indexer = RatioIndexer::new(k);
            let child = RatioIndexer::new(k + 1);
            let disc_k = (1.0 + disc.step_rate).powi(-(k as i32));
            let states = indexer.states();
            let mut g = Vec::with_capacity(states.len());
            let mut b = Vec::with_capacity(states.len());
            for &(c, d) in &states {
                let (cu, du) = step_up_state(c, d);
                let (cd, dd) = step_down_state(c, d);
                let vu = values[k + 1][child.index(cu, du)];
                let vd = values[k + 1][child.index(cd, dd)];
                let gamma = (up1 * vu - down1 * vd) / (disc.step_up - disc.step_down);
                let v = values[k][indexer.index(c, d)];
                g.push(gamma);
                b.push((v - gamma) * disc_k);
            }
            lattice.gamma.push(g);
            lattice.beta_coef.push(b);
        }
        lattice.values = values;
    }
    Ok(lattice)
}
