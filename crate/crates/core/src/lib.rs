//! Pricing and hedging of game (Israeli) options on finite binomial trees.
//!
//! A game option is an American-style contract whose seller may cancel early
//! by paying a penalty on top of the exercise value.  Its fair price is the
//! value of a zero-sum optimal-stopping (Dynkin) game, which on a finite
//! binomial tree is computable by backward induction.  This crate implements
//! that core machinery and the satellites built on it:
//!
//! * [`tree`] — finite binary event trees, CRR market dynamics, and the
//!   discretized Black-Scholes parameterization.
//! * [`dynkin`] — finite-horizon Dynkin games: backward induction,
//!   exhaustive enumeration oracles, epsilon-optimal stopping times.
//! * [`payoff`] — path-functional payoff library (vanilla, integral,
//!   Russian, barrier, truncated Asian).
//! * [`game_option`] — game-option pricing on CRR trees, rational exercise
//!   times and the seller's self-financing hedge.
//! * [`swing`] — multiple-exercise (swing) game options: layered dynamic
//!   programming, optimal stopping strategies, multi-exercise hedge.
//! * [`shortfall`] — the seller's shortfall risk for an under-funded hedge,
//!   by wealth dynamic programming gated by a brute-force oracle.
//! * [`pl`] — exact algebra on piecewise-linear functions (with a bottom
//!   element), including the epigraph-sum transform.
//! * [`txcost`] — superhedging prices and strategies under proportional
//!   transaction costs (bid-ask spreads) via piecewise-linear recursions.
//! * [`bridge`] — binomial approximation of the Black-Scholes model:
//!   convergence-rate fitting, Skorokhod-embedding Monte Carlo, strategy
//!   transport and near-hedging shortfall estimates.
//! * [`fileio`] — structured text formats for instances and strategy tables.

pub mod bridge;
pub mod dynkin;
pub mod error;
pub mod fileio;
pub mod game_option;
pub mod payoff;
pub mod pl;
pub mod shortfall;
pub mod swing;
pub mod tree;
pub mod txcost;

pub use error::{Error, Result};
pub use tree::{Adapted, BsDiscretization, CrrParams, EventTree, NodeId};
