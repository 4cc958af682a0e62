//! Structured text formats for instances.
//!
//! Per-node arrays are serialized in the canonical depth-first order:
//! preorder with the up (`+1`) child before the down (`-1`) child, the
//! same order as [`crate::tree::dfs_nodes`].  One-step probabilities
//! cover the non-terminal nodes only, in the same order restricted to
//! depths below the horizon.

use serde::{Deserialize, Serialize};

use crate::dynkin::DynkinInstance;
use crate::error::{Error, Result};
use crate::tree::{dfs_nodes, Adapted, EventTree, NodeId};
use crate::txcost::{FrictionMarket, TxPayoff};

/// Serialized Dynkin instance: tree depth, probabilities, and the three
/// payoff processes in depth-first order (`diagonal` defaults to
/// `lower`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DynkinInstanceFile {
    pub depth: usize,
    pub prob_up: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    #[serde(default)]
    pub diagonal: Option<Vec<f64>>,
}

fn pack(depth: usize, values: &Adapted) -> Vec<f64> {
    dfs_nodes(depth).iter().map(|&n| *values.get(n)).collect()
}

fn pack_nonterminal(depth: usize, f: impl Fn(NodeId) -> f64) -> Vec<f64> {
    dfs_nodes(depth)
        .iter()
        .filter(|n| n.t < depth)
        .map(|&n| f(n))
        .collect()
}

fn unpack(depth: usize, flat: &[f64], what: &str) -> Result<Adapted> {
    let nodes = dfs_nodes(depth);
    if flat.len() != nodes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: expected {} values in depth-first order, got {}",
            nodes.len(),
            flat.len()
        )));
    }
    let mut out = Adapted::constant(depth, 0.0);
    for (node, &v) in nodes.iter().zip(flat) {
        out.set(*node, v);
    }
    Ok(out)
}

fn unpack_nonterminal(depth: usize, flat: &[f64], what: &str) -> Result<Vec<Vec<f64>>> {
    let nodes: Vec<NodeId> = dfs_nodes(depth).into_iter().filter(|n| n.t < depth).collect();
    if flat.len() != nodes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: expected {} values for non-terminal nodes, got {}",
            nodes.len(),
            flat.len()
        )));
    }
    let mut levels: Vec<Vec<f64>> = (0..depth).map(|t| vec![0.0; 1 << t]).collect();
    for (node, &v) in nodes.iter().zip(flat) {
        levels[node.t][node.idx] = v;
    }
    Ok(levels)
}

impl DynkinInstanceFile {
    pub fn from_instance(instance: &DynkinInstance) -> Self {
        let depth = instance.tree.depth();
        DynkinInstanceFile {
            depth,
            prob_up: pack_nonterminal(depth, |n| instance.tree.p_up(n)),
            upper: pack(depth, &instance.upper),
            lower: pack(depth, &instance.lower),
            diagonal: Some(pack(depth, &instance.diagonal)),
        }
    }

    pub fn into_instance(&self) -> Result<DynkinInstance> {
        let tree = EventTree::new(
            self.depth,
            unpack_nonterminal(self.depth, &self.prob_up, "prob_up")?,
        )?;
        let upper = unpack(self.depth, &self.upper, "upper")?;
        let lower = unpack(self.depth, &self.lower, "lower")?;
        match &self.diagonal {
            Some(d) => {
                let diagonal = unpack(self.depth, d, "diagonal")?;
                DynkinInstance::new(tree, upper, lower, diagonal)
            }
            None => DynkinInstance::with_diagonal_lower(tree, upper, lower),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Serialized transaction-cost instance: tree, bid/ask processes, and the
/// cash/share payoff legs, all in depth-first order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TxInstanceFile {
    pub depth: usize,
    pub prob_up: Vec<f64>,
    pub ask: Vec<f64>,
    pub bid: Vec<f64>,
    pub x_cash: Vec<f64>,
    pub x_shares: Vec<f64>,
    pub y_cash: Vec<f64>,
    pub y_shares: Vec<f64>,
}

impl TxInstanceFile {
    pub fn from_instance(market: &FrictionMarket, payoff: &TxPayoff) -> Self {
        let depth = market.depth();
        TxInstanceFile {
            depth,
            prob_up: pack_nonterminal(depth, |n| market.tree.p_up(n)),
            ask: pack(depth, &market.ask),
            bid: pack(depth, &market.bid),
            x_cash: pack(depth, &payoff.x_cash),
            x_shares: pack(depth, &payoff.x_shares),
            y_cash: pack(depth, &payoff.y_cash),
            y_shares: pack(depth, &payoff.y_shares),
        }
    }

    pub fn into_instance(&self) -> Result<(FrictionMarket, TxPayoff)> {
        let tree = EventTree::new(
            self.depth,
            unpack_nonterminal(self.depth, &self.prob_up, "prob_up")?,
        )?;
        let market = FrictionMarket::new(
            tree,
            unpack(self.depth, &self.ask, "ask")?,
            unpack(self.depth, &self.bid, "bid")?,
        )?;
        let payoff = TxPayoff::new(
            &market,
            unpack(self.depth, &self.x_cash, "x_cash")?,
            unpack(self.depth, &self.x_shares, "x_shares")?,
            unpack(self.depth, &self.y_cash, "y_cash")?,
            unpack(self.depth, &self.y_shares, "y_shares")?,
        )?;
        Ok((market, payoff))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dynkin_roundtrip_through_toml() {
        let tree = EventTree::new(2, vec![vec![0.4], vec![0.3, 0.7]]).unwrap();
        let lower = Adapted::from_fn(2, |n| n.t as f64 * 0.5 + n.idx as f64 * 0.1);
        let upper = lower.map(|n, y| if n.t < 2 { y + 1.0 } else { *y });
        let instance = DynkinInstance::with_diagonal_lower(tree, upper, lower).unwrap();
        let file = DynkinInstanceFile::from_instance(&instance);
        let text = file.to_toml().unwrap();
        let back = DynkinInstanceFile::from_toml(&text).unwrap().into_instance().unwrap();
        for node in instance.upper.nodes() {
            assert_eq!(instance.upper.get(node), back.upper.get(node));
            assert_eq!(instance.lower.get(node), back.lower.get(node));
            assert_eq!(instance.diagonal.get(node), back.diagonal.get(node));
        }
        for node in instance.tree.non_terminal_nodes() {
            assert_eq!(instance.tree.p_up(node), back.tree.p_up(node));
        }
    }

    #[test]
    fn dynkin_file_rejects_bad_shapes() {
        let text = "depth = 2\nprob_up = [0.5]\nupper = [1.0]\nlower = [0.0]\n";
        let file = DynkinInstanceFile::from_toml(text).unwrap();
        assert!(file.into_instance().is_err());
    }

    #[test]
    fn tx_roundtrip_through_toml() {
        let tree = EventTree::homogeneous(2, 0.5).unwrap();
        let mid = Adapted::from_fn(2, |n| 10.0 + n.t as f64 + n.idx as f64);
        let market = FrictionMarket::new(
            tree,
            mid.map(|_, s| s * 1.1),
            mid.map(|_, s| s * 0.9),
        )
        .unwrap();
        let zero = Adapted::constant(2, 0.0);
        let y_cash = Adapted::from_fn(2, |n| n.idx as f64 * 0.25);
        let x_cash = y_cash.map(|n, y| if n.t < 2 { y + 0.5 } else { *y });
        let payoff = TxPayoff::new(&market, x_cash, zero.clone(), y_cash, zero).unwrap();
        let file = TxInstanceFile::from_instance(&market, &payoff);
        let (m2, p2) = TxInstanceFile::from_toml(&file.to_toml().unwrap())
            .unwrap()
            .into_instance()
            .unwrap();
        for node in market.ask.nodes() {
            assert_eq!(market.ask.get(node), m2.ask.get(node));
            assert_eq!(payoff.x_cash.get(node), p2.x_cash.get(node));
            assert_eq!(payoff.y_cash.get(node), p2.y_cash.get(node));
        }
    }
}
