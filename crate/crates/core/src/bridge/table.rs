//! Strategy tables: rational exercise rules and hedge coefficients on
//! sign sequences, evaluated incrementally through a cursor.
//!
//! Lattice-backed tables evaluate their state on the fly (prefix counts
//! for price-only payoffs, the max/price automaton for Russian payoffs);
//! the explicit table stores one record per sign prefix and has a
//! documented text serialization for small depths.

use std::fmt::Write as _;
use std::path::Path;

use super::recombining::{lattice_price, PriceOnlyLattice, RatioIndexer, RatioLattice};
use crate::error::{Error, Result};
use crate::tree::{BsDiscretization, NodeId, Sign};

/// Depth cap for explicit per-prefix tables (2^(n+1) records).
pub const MAX_EXPLICIT_DEPTH: usize = 20;

/// A persisted-or-procedural strategy table: stop rules of both players
/// plus the self-financing hedge coefficients, all functions of the sign
/// prefix.
pub trait StrategyTable {
    type Cursor: Clone;
    fn steps(&self) -> usize;
    fn root(&self) -> Self::Cursor;
    fn advance(&self, cur: &Self::Cursor, sign: Sign) -> Self::Cursor;
    /// Contact-set membership of the current prefix (first hit semantics
    /// are the walker's responsibility).
    fn seller_stops(&self, cur: &Self::Cursor) -> bool;
    fn buyer_stops(&self, cur: &Self::Cursor) -> bool;
    /// Holdings (bond units, shares) carried over the next step when the
    /// game is still running at this prefix.
    fn holdings(&self, cur: &Self::Cursor) -> (f64, f64);
    /// Lattice stock price at the current prefix.
    fn price(&self, cur: &Self::Cursor) -> f64;
    /// Wealth the hedge starts from (the lattice value).
    fn initial_wealth(&self) -> f64;
}

/// First hitting time of the seller's (or buyer's) contact set along a
/// sign sequence; `n` when no flag is hit earlier.
pub fn first_stop<T: StrategyTable>(table: &T, signs: &[Sign], seller: bool) -> usize {
    let mut cur = table.root();
    for k in 0..=table.steps() {
        let hit = if seller {
            table.seller_stops(&cur)
        } else {
            table.buyer_stops(&cur)
        };
        if hit {
            return k;
        }
        if k < table.steps() {
            cur = table.advance(&cur, signs[k]);
        }
    }
    table.steps()
}

impl StrategyTable for PriceOnlyLattice {
    type Cursor = (usize, usize);

    fn steps(&self) -> usize {
        self.disc.steps
    }

    fn root(&self) -> (usize, usize) {
        (0, 0)
    }

    fn advance(&self, cur: &(usize, usize), sign: Sign) -> (usize, usize) {
        (cur.0 + 1, cur.1 + usize::from(sign > 0))
    }

    fn seller_stops(&self, cur: &(usize, usize)) -> bool {
        self.stop_seller[cur.0][cur.1]
    }

    fn buyer_stops(&self, cur: &(usize, usize)) -> bool {
        self.stop_buyer[cur.0][cur.1]
    }

    fn holdings(&self, cur: &(usize, usize)) -> (f64, f64) {
        (self.beta[cur.0][cur.1], self.gamma[cur.0][cur.1])
    }

    fn price(&self, cur: &(usize, usize)) -> f64 {
        lattice_price(&self.disc, self.spot, cur.0, cur.1)
    }

    fn initial_wealth(&self) -> f64 {
        self.value
    }
}

/// Cursor of the ratio lattice: level, automaton state and running price.
#[derive(Clone, Copy, Debug)]
pub struct RatioCursor {
    pub k: usize,
    pub c: usize,
    pub d: usize,
    pub price: f64,
}

impl StrategyTable for RatioLattice {
    type Cursor = RatioCursor;

    fn steps(&self) -> usize {
        self.disc.steps
    }

    fn root(&self) -> RatioCursor {
        RatioCursor {
            k: 0,
            c: 0,
            d: 0,
            price: self.spot,
        }
    }

    fn advance(&self, cur: &RatioCursor, sign: Sign) -> RatioCursor {
        let kd = self.disc.log_step();
        let rtn = self.disc.rate * self.disc.dt();
        let (c2, d2) = if sign > 0 {
            if cur.c == 0 {
                (0, 0)
            } else {
                (cur.c - 1, cur.d + 1)
            }
        } else {
            (cur.c + 1, cur.d + 1)
        };
        let (c2, d2) = if c2 == 0 || (c2 as f64 * kd) <= (d2 as f64 * rtn) {
            (0, 0)
        } else {
            (c2, d2)
        };
        let ret = if sign > 0 {
            1.0 + self.disc.step_up
        } else {
            1.0 + self.disc.step_down
        };
        RatioCursor {
            k: cur.k + 1,
            c: c2,
            d: d2,
            price: cur.price * ret,
        }
    }

    fn seller_stops(&self, cur: &RatioCursor) -> bool {
        self.stop_seller[cur.k][RatioIndexer::new(cur.k).index(cur.c, cur.d)]
    }

    fn buyer_stops(&self, cur: &RatioCursor) -> bool {
        self.stop_buyer[cur.k][RatioIndexer::new(cur.k).index(cur.c, cur.d)]
    }

    fn holdings(&self, cur: &RatioCursor) -> (f64, f64) {
        let idx = RatioIndexer::new(cur.k).index(cur.c, cur.d);
        (
            self.beta_coef[cur.k][idx] * cur.price,
            self.gamma[cur.k][idx],
        )
    }

    fn price(&self, cur: &RatioCursor) -> f64 {
        cur.price
    }

    fn initial_wealth(&self) -> f64 {
        self.value
    }
}

/// Explicit per-prefix table with market metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitTable {
    pub disc: BsDiscretization,
    pub spot: f64,
    /// First-hit stop flags per level (antichain form).
    pub seller: Vec<Vec<bool>>,
    pub buyer: Vec<Vec<bool>>,
    /// Holdings over the next step per prefix, levels `0..n`.
    pub bond: Vec<Vec<f64>>,
    pub shares: Vec<Vec<f64>>,
}

impl StrategyTable for ExplicitTable {
    type Cursor = NodeId;

    fn steps(&self) -> usize {
        self.disc.steps
    }

    fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    fn advance(&self, cur: &NodeId, sign: Sign) -> NodeId {
        cur.child(sign)
    }

    fn seller_stops(&self, cur: &NodeId) -> bool {
        self.seller[cur.t][cur.idx]
    }

    fn buyer_stops(&self, cur: &NodeId) -> bool {
        self.buyer[cur.t][cur.idx]
    }

    fn holdings(&self, cur: &NodeId) -> (f64, f64) {
        (self.bond[cur.t][cur.idx], self.shares[cur.t][cur.idx])
    }

    fn price(&self, cur: &NodeId) -> f64 {
        let mut s = self.spot;
        for k in 0..cur.t {
            s *= if cur.sign_at(k) > 0 {
                1.0 + self.disc.step_up
            } else {
                1.0 + self.disc.step_down
            };
        }
        s
    }

    fn initial_wealth(&self) -> f64 {
        if self.bond.is_empty() {
            0.0
        } else {
            self.bond[0][0] + self.shares[0][0] * self.spot
        }
    }
}

/// Materialize any strategy table into explicit per-prefix records,
/// freezing the portfolio in the bond after the seller's stop.
pub fn to_explicit<T: StrategyTable>(
    table: &T,
    disc: &BsDiscretization,
    spot: f64,
) -> Result<ExplicitTable> {
    let n = table.steps();
    if n > MAX_EXPLICIT_DEPTH {
        return Err(Error::EnumerationTooLarge {
            size: 1u128 << (n + 1),
            bound: 1u128 << (MAX_EXPLICIT_DEPTH + 1),
        });
    }
    let mut out = ExplicitTable {
        disc: *disc,
        spot,
        seller: (0..=n).map(|t| vec![false; 1 << t]).collect(),
        buyer: (0..=n).map(|t| vec![false; 1 << t]).collect(),
        bond: (0..n).map(|t| vec![0.0; 1 << t]).collect(),
        shares: (0..n).map(|t| vec![0.0; 1 << t]).collect(),
    };
    #[allow(clippy::too_many_arguments)]
    fn rec<T: StrategyTable>(
        table: &T,
        node: NodeId,
        cur: &T::Cursor,
        seller_stopped: bool,
        buyer_stopped: bool,
        incoming: (f64, f64),
        out: &mut ExplicitTable,
    ) {
        let n = table.steps();
        let k = node.t;
        let s_hit = !seller_stopped && table.seller_stops(cur);
        let b_hit = !buyer_stopped && table.buyer_stops(cur);
        out.seller[k][node.idx] = s_hit || (!seller_stopped && k == n);
        out.buyer[k][node.idx] = b_hit || (!buyer_stopped && k == n);
        let seller_stopped = seller_stopped || s_hit;
        let buyer_stopped = buyer_stopped || b_hit;
        if k == n {
            return;
        }
        let held = if seller_stopped {
            // liquidate into the bond at this node's price
            let b_k = (1.0 + out.disc.step_rate).powi(k as i32);
            let frozen = incoming.0 + incoming.1 * table.price(cur) / b_k;
            (frozen, 0.0)
        } else {
            table.holdings(cur)
        };
        out.bond[k][node.idx] = held.0;
        out.shares[k][node.idx] = held.1;
        for sign in [1i8, -1] {
            rec(
                table,
                node.child(sign),
                &table.advance(cur, sign),
                seller_stopped,
                buyer_stopped,
                held,
                out,
            );
        }
    }
    // the hedge starts fully in bond at the initial wealth
    rec(
        table,
        NodeId::ROOT,
        &table.root(),
        false,
        false,
        (table.initial_wealth(), 0.0),
        &mut out,
    );
    Ok(out)
}

/// Write the documented text format: a header with the market data, then
/// one record per prefix in depth-first order (preorder, up child first):
/// `prefix,seller_stop,buyer_stop,bond,shares` with empty holdings at
/// maturity prefixes.
pub fn write_table(table: &ExplicitTable) -> String {
    let n = table.disc.steps;
    let mut s = String::new();
    s.push_str("gamehedge-table v1\n");
    let _ = writeln!(s, "steps = {n}");
    let _ = writeln!(s, "spot = {:.17e}", table.spot);
    let _ = writeln!(s, "rate = {:.17e}", table.disc.rate);
    let _ = writeln!(s, "vol = {:.17e}", table.disc.vol);
    let _ = writeln!(s, "maturity = {:.17e}", table.disc.maturity);
    s.push_str("# prefix,seller_stop,buyer_stop,bond,shares\n");
    for node in crate::tree::dfs_nodes(n) {
        let prefix: String = node
            .signs()
            .iter()
            .map(|&x| if x > 0 { '+' } else { '-' })
            .collect();
        let stop_s = u8::from(table.seller[node.t][node.idx]);
        let stop_b = u8::from(table.buyer[node.t][node.idx]);
        if node.t < n {
            let _ = writeln!(
                s,
                "{prefix},{stop_s},{stop_b},{:.17e},{:.17e}",
                table.bond[node.t][node.idx], table.shares[node.t][node.idx]
            );
        } else {
            let _ = writeln!(s, "{prefix},{stop_s},{stop_b},,");
        }
    }
    s
}

/// Parse the text format produced by [`write_table`].
pub fn parse_table(text: &str) -> Result<ExplicitTable> {
    let mut lines = text.lines();
    let magic = lines
        .next()
        .ok_or_else(|| Error::Parse("empty table file".into()))?;
    if magic.trim() != "gamehedge-table v1" {
        return Err(Error::Parse(format!("unexpected header: {magic}")));
    }
    let mut steps: Option<usize> = None;
    let mut spot = None;
    let mut rate = None;
    let mut vol = None;
    let mut maturity = None;
    let mut records: Vec<(NodeId, bool, bool, Option<(f64, f64)>)> = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            let value = value.trim();
            match key.trim() {
                "steps" => steps = Some(value.parse().map_err(|e| Error::Parse(format!("steps: {e}")))?),
                "spot" => spot = Some(parse_f64(value)?),
                "rate" => rate = Some(parse_f64(value)?),
                "vol" => vol = Some(parse_f64(value)?),
                "maturity" => maturity = Some(parse_f64(value)?),
                other => return Err(Error::Parse(format!("unknown header key: {other}"))),
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!("malformed record: {line}")));
        }
        let signs: Vec<Sign> = fields[0]
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("bad prefix character: {other}"))),
            })
            .collect::<Result<_>>()?;
        let node = NodeId::from_signs(&signs);
        let stop_s = fields[1] == "1";
        let stop_b = fields[2] == "1";
        let holdings = if fields[3].is_empty() && fields[4].is_empty() {
            None
        } else {
            Some((parse_f64(fields[3])?, parse_f64(fields[4])?))
        };
        records.push((node, stop_s, stop_b, holdings));
    }
    let n = steps.ok_or_else(|| Error::Parse("missing steps".into()))?;
    let disc = crate::tree::bs_to_crr(
        rate.ok_or_else(|| Error::Parse("missing rate".into()))?,
        vol.ok_or_else(|| Error::Parse("missing vol".into()))?,
        maturity.ok_or_else(|| Error::Parse("missing maturity".into()))?,
        n,
    )?;
    let spot = spot.ok_or_else(|| Error::Parse("missing spot".into()))?;
    if records.len() != (1 << (n + 1)) - 1 {
        return Err(Error::Parse(format!(
            "expected {} records, got {}",
            (1usize << (n + 1)) - 1,
            records.len()
        )));
    }
    let mut out = ExplicitTable {
        disc,
        spot,
        seller: (0..=n).map(|t| vec![false; 1 << t]).collect(),
        buyer: (0..=n).map(|t| vec![false; 1 << t]).collect(),
        bond: (0..n).map(|t| vec![0.0; 1 << t]).collect(),
        shares: (0..n).map(|t| vec![0.0; 1 << t]).collect(),
    };
    for (node, stop_s, stop_b, holdings) in records {
        if node.t > n {
            return Err(Error::Parse(format!("prefix deeper than steps: {node:?}")));
        }
        out.seller[node.t][node.idx] = stop_s;
        out.buyer[node.t][node.idx] = stop_b;
        match holdings {
            Some((b, g)) if node.t < n => {
                out.bond[node.t][node.idx] = b;
                out.shares[node.t][node.idx] = g;
            }
            None if node.t == n => {}
            _ => {
                return Err(Error::Parse(format!(
                    "holdings present exactly below maturity expected at {node:?}"
                )))
            }
        }
    }
    Ok(out)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("bad number {s}: {e}")))
}

/// Write a table file to disk.
pub fn save_table(table: &ExplicitTable, path: &Path) -> Result<()> {
    std::fs::write(path, write_table(table))?;
    Ok(())
}

/// Read a table file from disk.
pub fn load_table(path: &Path) -> Result<ExplicitTable> {
    parse_table(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::PayoffSpec;
    use crate::tree::bs_to_crr;

    #[test]
    fn explicit_roundtrip_through_text() {
        let disc = bs_to_crr(0.05, 0.2, 1.0, 4).unwrap();
        let payoff = PayoffSpec::VanillaPut {
            strike: 100.0,
            penalty: 2.0,
        };
        let lattice =
            super::super::recombining::price_only_lattice(&payoff, &disc, 100.0, true).unwrap();
        let explicit = to_explicit(&lattice, &disc, 100.0).unwrap();
        let text = write_table(&explicit);
        let parsed = parse_table(&text).unwrap();
        assert_eq!(explicit.seller, parsed.seller);
        assert_eq!(explicit.buyer, parsed.buyer);
        assert_eq!(explicit.bond, parsed.bond);
        assert_eq!(explicit.shares, parsed.shares);
    }

    #[test]
    fn first_stop_consistency_between_lattice_and_explicit() {
        let disc = bs_to_crr(0.04, 0.3, 0.5, 5).unwrap();
        let payoff = PayoffSpec::VanillaPut {
            strike: 105.0,
            penalty: 1.0,
        };
        let lattice =
            super::super::recombining::price_only_lattice(&payoff, &disc, 100.0, true).unwrap();
        let explicit = to_explicit(&lattice, &disc, 100.0).unwrap();
        for idx in 0..1usize << 5 {
            let node = NodeId { t: 5, idx };
            let signs = node.signs();
            assert_eq!(
                first_stop(&lattice, &signs, true),
                first_stop(&explicit, &signs, true),
                "seller stop mismatch on {signs:?}"
            );
            assert_eq!(
                first_stop(&lattice, &signs, false),
                first_stop(&explicit, &signs, false),
                "buyer stop mismatch on {signs:?}"
            );
        }
    }

    #[test]
    fn constant_stop_rules_transport_trivially() {
        let disc = bs_to_crr(0.05, 0.2, 1.0, 3).unwrap();
        let payoff = PayoffSpec::Constant {
            value: 1.0,
            penalty: 0.0,
        };
        let lattice =
            super::super::recombining::price_only_lattice(&payoff, &disc, 50.0, true).unwrap();
        for signs in [vec![1, 1, 1], vec![-1, 1, -1]] {
            assert_eq!(first_stop(&lattice, &signs, true), 0);
            assert_eq!(first_stop(&lattice, &signs, false), 0);
        }
    }
}
