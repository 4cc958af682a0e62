//! Path-functional payoffs for game options.
//!
//! A payoff is a pair of nonnegative functionals on price-path prefixes:
//! the holder leg `F` and the cancellation penalty `Delta`, with a declared
//! Lipschitz budget `L >= 1` covering both the spatial bound
//! `|F_s(v) - F_s(w)| + |D_s(v) - D_s(w)| <= L (s+1) sup|v - w|`
//! and the temporal bound in the time argument.  Path integrals are
//! discretized as left-endpoint Riemann sums on the lattice clock.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A price-path prefix: physical times and prices at steps `0..=t`.
#[derive(Clone, Copy, Debug)]
pub struct PathSlice<'a> {
    pub times: &'a [f64],
    pub prices: &'a [f64],
}

impl<'a> PathSlice<'a> {
    pub fn new(times: &'a [f64], prices: &'a [f64]) -> Self {
        debug_assert_eq!(times.len(), prices.len());
        debug_assert!(!times.is_empty());
        PathSlice { times, prices }
    }

    pub fn t(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn current(&self) -> f64 {
        *self.prices.last().unwrap()
    }

    pub fn running_max(&self) -> f64 {
        self.prices.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Left-endpoint Riemann sum of `f(price)` over the prefix.
    pub fn left_integral(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.times.len() - 1 {
            acc += f(self.prices[k]) * (self.times[k + 1] - self.times[k]);
        }
        acc
    }
}

/// How much structure a payoff exposes to recombining fast paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarkovClass {
    /// Reads the whole path; only the non-recombining pricer applies.
    PathDependent,
    /// Depends on (time, current price) only.
    PriceOnly,
    /// Depends on (time, price, running max) and scales linearly in price
    /// when the floor lies at or below the initial price (Russian type).
    MaxHomogeneous,
}

/// Deterministic map from a price-path prefix to the holder payoff and the
/// cancellation penalty.
pub trait PathPayoff {
    fn holder(&self, path: &PathSlice<'_>) -> f64;
    fn penalty(&self, path: &PathSlice<'_>) -> f64;
    /// Declared Lipschitz budget for the empirical regularity check.
    fn lipschitz(&self) -> f64;
    fn markov_class(&self) -> MarkovClass {
        MarkovClass::PathDependent
    }
}

/// Serializable payoff library.  All constructors validate their
/// parameters; see the free functions below.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffSpec {
    /// `F = (strike - S_t)^+`, constant penalty.
    VanillaPut { strike: f64, penalty: f64 },
    /// `F = (S_t - strike)^+`, constant penalty.
    VanillaCall { strike: f64, penalty: f64 },
    /// `F = (coeff * int S du - strike)^+`, penalty `pen_coeff * int S du`.
    IntegralCall {
        strike: f64,
        coeff: f64,
        pen_coeff: f64,
    },
    /// `F = (strike - coeff * int S du)^+`, penalty `pen_coeff * int S du`.
    IntegralPut {
        strike: f64,
        coeff: f64,
        pen_coeff: f64,
    },
    /// `F = max(floor, running max of S)`, penalty `pen_rate * S_t`.
    Russian { floor: f64, pen_rate: f64 },
    /// `F = (avg - strike)^+` with `avg = int S du / max(t, eps)`,
    /// constant penalty.  `eps = 0` reproduces the untruncated Asian
    /// payoff, which violates the temporal regularity bound near `t = 0`.
    AsianCall {
        strike: f64,
        eps: f64,
        penalty: f64,
    },
    /// Put flavour of `AsianCall`.
    AsianPut {
        strike: f64,
        eps: f64,
        penalty: f64,
    },
    /// Constant holder payoff and penalty; mostly for tests.
    Constant { value: f64, penalty: f64 },
    /// Double knock-out wrapper: both legs are zeroed from the first time
    /// the price leaves the open interval `(lo, hi)`.
    Barrier {
        lo: f64,
        hi: f64,
        inner: Box<PayoffSpec>,
    },
}

pub fn vanilla_put(strike: f64, penalty: f64) -> Result<PayoffSpec> {
    require_positive("strike", strike)?;
    require_nonnegative("penalty", penalty)?;
    Ok(PayoffSpec::VanillaPut { strike, penalty })
}

pub fn vanilla_call(strike: f64, penalty: f64) -> Result<PayoffSpec> {
    require_positive("strike", strike)?;
    require_nonnegative("penalty", penalty)?;
    Ok(PayoffSpec::VanillaCall { strike, penalty })
}

pub fn integral_call(strike: f64, coeff: f64, pen_coeff: f64) -> Result<PayoffSpec> {
    require_nonnegative("strike", strike)?;
    require_positive("coeff", coeff)?;
    require_nonnegative("pen_coeff", pen_coeff)?;
    Ok(PayoffSpec::IntegralCall {
        strike,
        coeff,
        pen_coeff,
    })
}

pub fn integral_put(strike: f64, coeff: f64, pen_coeff: f64) -> Result<PayoffSpec> {
    require_positive("strike", strike)?;
    require_positive("coeff", coeff)?;
    require_nonnegative("pen_coeff", pen_coeff)?;
    Ok(PayoffSpec::IntegralPut {
        strike,
        coeff,
        pen_coeff,
    })
}

pub fn russian(floor: f64, pen_rate: f64) -> Result<PayoffSpec> {
    require_nonnegative("floor", floor)?;
    require_nonnegative("pen_rate", pen_rate)?;
    Ok(PayoffSpec::Russian { floor, pen_rate })
}

pub fn asian_call_truncated(strike: f64, eps: f64, penalty: f64) -> Result<PayoffSpec> {
    require_positive("strike", strike)?;
    require_positive("eps", eps)?;
    require_nonnegative("penalty", penalty)?;
    Ok(PayoffSpec::AsianCall {
        strike,
        eps,
        penalty,
    })
}

pub fn asian_put_truncated(strike: f64, eps: f64, penalty: f64) -> Result<PayoffSpec> {
    require_positive("strike", strike)?;
    require_positive("eps", eps)?;
    require_nonnegative("penalty", penalty)?;
    Ok(PayoffSpec::AsianPut {
        strike,
        eps,
        penalty,
    })
}

/// Untruncated Asian call (`eps = 0`), provided for regularity
/// diagnostics; the truncated constructor is the production entry point.
pub fn asian_call_untruncated(strike: f64, penalty: f64) -> Result<PayoffSpec> {
    require_positive("strike", strike)?;
    require_nonnegative("penalty", penalty)?;
    Ok(PayoffSpec::AsianCall {
        strike,
        eps: 0.0,
        penalty,
    })
}

pub fn barrier_knockout(lo: f64, hi: f64, inner: PayoffSpec) -> Result<PayoffSpec> {
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "barrier requires lo < hi, got lo={lo}, hi={hi}"
        )));
    }
    require_nonnegative("lo", lo)?;
    Ok(PayoffSpec::Barrier {
        lo,
        hi,
        inner: Box::new(inner),
    })
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )));
    }
    Ok(())
}

fn require_nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be nonnegative, got {v}"
        )));
    }
    Ok(())
}

impl PayoffSpec {
    /// First index at which the price has left `(lo, hi)`, if any.
    fn knockout_index(lo: f64, hi: f64, prices: &[f64]) -> Option<usize> {
        prices.iter().position(|&s| s <= lo || s >= hi)
    }
}

impl PathPayoff for PayoffSpec {
    fn holder(&self, path: &PathSlice<'_>) -> f64 {
        match self {
            PayoffSpec::VanillaPut { strike, .. } => (strike - path.current()).max(0.0),
            PayoffSpec::VanillaCall { strike, .. } => (path.current() - strike).max(0.0),
            PayoffSpec::IntegralCall { strike, coeff, .. } => {
                (coeff * path.left_integral(|s| s) - strike).max(0.0)
            }
            PayoffSpec::IntegralPut { strike, coeff, .. } => {
                (strike - coeff * path.left_integral(|s| s)).max(0.0)
            }
            PayoffSpec::Russian { floor, .. } => floor.max(path.running_max()),
            PayoffSpec::AsianCall { strike, eps, .. } => {
                let t = path.t().max(*eps);
                if t == 0.0 {
                    // untruncated payoff at time zero: average degenerates
                    // to the spot
                    (path.current() - strike).max(0.0)
                } else {
                    (path.left_integral(|s| s) / t - strike).max(0.0)
                }
            }
            PayoffSpec::AsianPut { strike, eps, .. } => {
                let t = path.t().max(*eps);
                if t == 0.0 {
                    (strike - path.current()).max(0.0)
                } else {
                    (strike - path.left_integral(|s| s) / t).max(0.0)
                }
            }
            PayoffSpec::Constant { value, .. } => *value,
            PayoffSpec::Barrier { lo, hi, inner } => {
                // knocked out at or before the current step
                if PayoffSpec::knockout_index(*lo, *hi, path.prices).is_some() {
                    0.0
                } else {
                    inner.holder(path)
                }
            }
        }
    }

    fn penalty(&self, path: &PathSlice<'_>) -> f64 {
        match self {
            PayoffSpec::VanillaPut { penalty, .. }
            | PayoffSpec::VanillaCall { penalty, .. }
            | PayoffSpec::AsianCall { penalty, .. }
            | PayoffSpec::AsianPut { penalty, .. }
            | PayoffSpec::Constant { penalty, .. } => *penalty,
            PayoffSpec::IntegralCall { pen_coeff, .. }
            | PayoffSpec::IntegralPut { pen_coeff, .. } => {
                pen_coeff * path.left_integral(|s| s)
            }
            PayoffSpec::Russian { pen_rate, .. } => pen_rate * path.current(),
            PayoffSpec::Barrier { lo, hi, inner } => {
                if PayoffSpec::knockout_index(*lo, *hi, path.prices).is_some() {
                    0.0
                } else {
                    inner.penalty(path)
                }
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        match self {
            PayoffSpec::VanillaPut { .. } | PayoffSpec::VanillaCall { .. } => 1.0,
            PayoffSpec::IntegralCall {
                coeff, pen_coeff, ..
            }
            | PayoffSpec::IntegralPut {
                coeff, pen_coeff, ..
            } => (coeff + pen_coeff).max(1.0),
            PayoffSpec::Russian { pen_rate, .. } => 1.0 + pen_rate,
            PayoffSpec::AsianCall { eps, .. } | PayoffSpec::AsianPut { eps, .. } => {
                if *eps > 0.0 {
                    // the average drifts at rate up to 2 sup|path| / eps
                    1.0 + 2.0 / eps
                } else {
                    1.0 // the untruncated payoff has no valid budget; the
                        // regularity check is expected to flag it
                }
            }
            PayoffSpec::Constant { .. } => 1.0,
            PayoffSpec::Barrier { inner, .. } => inner.lipschitz(),
        }
    }

    fn markov_class(&self) -> MarkovClass {
        match self {
            PayoffSpec::VanillaPut { .. }
            | PayoffSpec::VanillaCall { .. }
            | PayoffSpec::Constant { .. } => MarkovClass::PriceOnly,
            PayoffSpec::Russian { .. } => MarkovClass::MaxHomogeneous,
            _ => MarkovClass::PathDependent,
        }
    }
}
