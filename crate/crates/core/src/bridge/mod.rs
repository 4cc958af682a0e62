//! Binomial approximation of the Black-Scholes model: price sequences on
//! refining lattices, empirical convergence-rate fitting, Skorokhod
//! embedding of the binomial walk, transported exercise times, and the
//! near-hedging portfolio with its maximal-shortfall estimate.

pub mod embedding;
pub mod recombining;
pub mod table;

pub use embedding::{
    first_increment_stats, mc_hedge_shortfall, mc_value_check, simulate_embedding,
    transport_times, EmbedConfig, EmbeddedPath, FirstIncrementStats, McShortfallReport,
    McValueReport,
};
pub use recombining::{price_only_lattice, russian_lattice, PriceOnlyLattice, RatioLattice};
pub use table::{
    first_stop, load_table, parse_table, save_table, to_explicit, write_table, ExplicitTable,
    StrategyTable, MAX_EXPLICIT_DEPTH,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game_option::{self, GameOptionInstance};
use crate::payoff::{MarkovClass, PathPayoff, PathSlice, PayoffSpec};
use crate::tree::bs_to_crr;

/// Black-Scholes market data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsParams {
    pub spot: f64,
    pub rate: f64,
    pub vol: f64,
    pub maturity: f64,
}

impl BsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0) || !(self.vol > 0.0) || !(self.maturity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need positive spot/vol/maturity, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Depth cap for the non-recombining fallback pricer.
pub const MAX_GENERIC_DEPTH: usize = 20;

/// Price a payoff on the `n`-step lattice, dispatching on its Markov
/// class: price-only and Russian payoffs use the recombining fast paths,
/// anything else walks the full tree (small `n` only).
pub fn price_lattice(payoff: &PayoffSpec, bs: &BsParams, n: usize) -> Result<f64> {
    bs.validate()?;
    let disc = bs_to_crr(bs.rate, bs.vol, bs.maturity, n)?;
    match payoff.markov_class() {
        MarkovClass::PriceOnly => Ok(price_only_lattice(payoff, &disc, bs.spot, false)?.value),
        MarkovClass::MaxHomogeneous => match payoff {
            PayoffSpec::Russian { floor, pen_rate } if *floor <= bs.spot => {
                Ok(russian_lattice(*floor, *pen_rate, &disc, bs.spot, false)?.value)
            }
            _ => price_generic(payoff, bs, n),
        },
        MarkovClass::PathDependent => price_generic(payoff, bs, n),
    }
}

fn price_generic(payoff: &PayoffSpec, bs: &BsParams, n: usize) -> Result<f64> {
    if n > MAX_GENERIC_DEPTH {
        return Err(Error::EnumerationTooLarge {
            size: 1u128 << (n + 1),
            bound: 1u128 << (MAX_GENERIC_DEPTH + 1),
        });
    }
    let disc = bs_to_crr(bs.rate, bs.vol, bs.maturity, n)?;
    let params = disc.to_crr(bs.spot)?;
    let inst = GameOptionInstance::build(params, payoff, disc.dt())?;
    Ok(game_option::price(&inst)?.value)
}

/// One entry of a price sequence; per-`n` failures are reported, not
/// fatal.
#[derive(Clone, Debug)]
pub struct PricePoint {
    pub steps: usize,
    pub value: std::result::Result<f64, String>,
}

/// Price the payoff on a sequence of refining lattices.
pub fn price_sequence(payoff: &PayoffSpec, bs: &BsParams, ns: &[usize]) -> Vec<PricePoint> {
    ns.iter()
        .map(|&n| PricePoint {
            steps: n,
            value: price_lattice(payoff, bs, n).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Per-`n` convergence data against a fine reference.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub value: f64,
    pub error: f64,
    pub envelope: f64,
    /// Meaningful for `steps` beyond the fit range: is the error inside
    /// the fitted envelope?
    pub within: bool,
}

/// The fitted envelope `c_hat * n^{-1/4} (ln n)^{3/4}` and per-`n`
/// errors.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub c_hat: f64,
    pub fit_max_steps: usize,
    pub reference_steps: usize,
    pub reference_value: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Steps beyond the fit range whose error escapes the envelope.
    pub violations: Vec<usize>,
}

/// The envelope shape `n^{-1/4} (ln n)^{3/4}`.
pub fn envelope_shape(n: usize) -> f64 {
    (n as f64).powf(-0.25) * (n as f64).ln().powf(0.75)
}

/// Fit the convergence constant on the coarse lattices and check that the
/// finer errors stay inside the fitted envelope.  The reference must be
/// at least four times finer than the largest analyzed lattice.
pub fn convergence_report(
    points: &[(usize, f64)],
    reference_steps: usize,
    reference_value: f64,
    fit_max_steps: usize,
) -> Result<ConvergenceReport> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("no price points".into()));
    }
    let max_n = points.iter().map(|&(n, _)| n).max().unwrap();
    if reference_steps < 4 * max_n {
        return Err(Error::InvalidParameter(format!(
            "reference lattice ({reference_steps} steps) must be at least 4x the largest analyzed lattice ({max_n})"
        )));
    }
    if !points.iter().any(|&(n, _)| n <= fit_max_steps) {
        return Err(Error::InvalidParameter(
            "no points inside the fit range".into(),
        ));
    }
    let mut c_hat = 0.0f64;
    for &(n, v) in points {
        if n <= fit_max_steps {
            c_hat = c_hat.max((v - reference_value).abs() / envelope_shape(n));
        }
    }
    let mut rows = Vec::with_capacity(points.len());
    let mut violations = Vec::new();
    for &(n, v) in points {
        let error = (v - reference_value).abs();
        let envelope = c_hat * envelope_shape(n);
        let within = error <= envelope * (1.0 + 1e-9);
        if n > fit_max_steps && !within {
            violations.push(n);
        }
        rows.push(ConvergenceRow {
            steps: n,
            value: v,
            error,
            envelope,
            within,
        });
    }
    Ok(ConvergenceReport {
        c_hat,
        fit_max_steps,
        reference_steps,
        reference_value,
        rows,
        violations,
    })
}

/// Empirical regularity constants of a payoff: observed spatial and
/// temporal ratios over sampled path pairs against the declared budget.
#[derive(Clone, Debug)]
pub struct LipschitzReport {
    pub declared: f64,
    pub spatial_max_ratio: f64,
    pub temporal_max_ratio: f64,
    pub spatial_violations: usize,
    pub temporal_violations: usize,
    pub samples: usize,
}

impl LipschitzReport {
    pub fn ok(&self) -> bool {
        self.spatial_violations == 0 && self.temporal_violations == 0
    }
}

/// Sample random lattice-clock path pairs and measure the spatial bound
/// `|F_s(v) - F_s(w)| + |D_s(v) - D_s(w)| <= L (s+1) sup|v - w|` and the
/// temporal bound in the time argument.  Violations are reported, never
/// fatal: the untruncated Asian payoff is expected to violate the
/// temporal bound near time zero.
pub fn lipschitz_check(
    payoff: &PayoffSpec,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> LipschitzReport {
    let steps = 32usize;
    let horizon = 1.0f64;
    let dt = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let slack = 1.0 + 1e-6;
    let declared = payoff.lipschitz();
    let mut report = LipschitzReport {
        declared,
        spatial_max_ratio: 0.0,
        temporal_max_ratio: 0.0,
        spatial_violations: 0,
        temporal_violations: 0,
        samples,
    };
    for _ in 0..samples {
        let z0 = rng.random_range(0.5..2.0);
        let mut path = vec![z0];
        for _ in 0..steps {
            let step: f64 = rng.random_range(-0.25..0.25);
            path.push(path.last().unwrap() * step.exp());
        }
        // sibling path: multiplicative perturbation
        let other: Vec<f64> = path
            .iter()
            .map(|v| v * rng.random_range(-0.1..0.1f64).exp())
            .collect();
        // payoff legs at every cut of both paths
        let legs: Vec<(f64, f64)> = (0..=steps)
            .map(|k| eval_legs(payoff, &times[..=k], &path[..=k]))
            .collect();
        let other_legs: Vec<(f64, f64)> = (0..=steps)
            .map(|k| eval_legs(payoff, &times[..=k], &other[..=k]))
            .collect();
        // spatial bound at every cut
        let mut d = 0.0f64;
        for k in 1..=steps {
            d = d.max((path[k] - other[k]).abs()).max((path[0] - other[0]).abs());
            if d == 0.0 {
                continue;
            }
            let num =
                (legs[k].0 - other_legs[k].0).abs() + (legs[k].1 - other_legs[k].1).abs();
            let ratio = num / ((times[k] + 1.0) * d);
            report.spatial_max_ratio = report.spatial_max_ratio.max(ratio);
            if ratio > declared * slack {
                report.spatial_violations += 1;
            }
        }
        // temporal bound over every index pair
        for s_idx in 1..steps {
            let mut sup_all: f64 = path[..=s_idx].iter().fold(0.0, |m, v| m.max(v.abs()));
            let mut sup_move = 0.0f64;
            for t_idx in s_idx + 1..=steps {
                sup_all = sup_all.max(path[t_idx].abs());
                sup_move = sup_move.max((path[t_idx] - path[s_idx]).abs());
                let num = (legs[t_idx].0 - legs[s_idx].0).abs()
                    + (legs[t_idx].1 - legs[s_idx].1).abs();
                let denom = (times[t_idx] - times[s_idx]) * (1.0 + sup_all) + sup_move;
                if denom <= 0.0 {
                    continue;
                }
                let ratio = num / denom;
                report.temporal_max_ratio = report.temporal_max_ratio.max(ratio);
                if ratio > declared * slack {
                    report.temporal_violations += 1;
                }
            }
        }
    }
    report
}

fn eval_legs(payoff: &PayoffSpec, times: &[f64], prices: &[f64]) -> (f64, f64) {
    let slice = PathSlice::new(times, prices);
    (payoff.holder(&slice), payoff.penalty(&slice))
}
