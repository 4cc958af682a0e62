//! Skorokhod-type embedding of the binomial walk into the drifted
//! Brownian motion, and the Monte Carlo drivers built on it: transported
//! exercise times, value checks, and the near-hedging maximal shortfall.
//!
//! The Brownian path is simulated by a plain Euler scheme on a fine grid;
//! embedding times are the first grid times at which the driftless-scale
//! increment reaches `kappa sqrt(T/n)` in log-price terms (no bridge
//! correction — the grid sensitivity is measured instead).  Paths are
//! independent with counter-based seeding: path `i` draws from stream `i`
//! of the master seed, so results are identical for any parallelism.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::table::{first_stop, StrategyTable};
use super::BsParams;
use crate::error::{Error, Result};
use crate::payoff::{MarkovClass, PathPayoff, PayoffSpec};
use crate::tree::Sign;

/// Simulation configuration.
#[derive(Clone, Copy, Debug)]
pub struct EmbedConfig {
    /// Fine grid steps per embedding increment (`m`, at least 100 for
    /// production runs; the effective step is `T/(n m)`).
    pub fine_per_step: usize,
    /// Simulation horizon in units of the maturity (paths that fail to
    /// produce all crossings by then are padded with fair coins and
    /// flagged).
    pub cap_factor: f64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            fine_per_step: 128,
            cap_factor: 4.0,
        }
    }
}

/// One embedded path: crossing times (with `theta_0 = 0` at index 0), the
/// sign sequence, and the driftless Brownian values at the crossings.
#[derive(Clone, Debug)]
pub struct EmbeddedPath {
    pub thetas: Vec<f64>,
    pub signs: Vec<Sign>,
    pub bstar_at_thetas: Vec<f64>,
    pub padded: bool,
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulate one embedded path.  The drifted motion is
/// `B*_t = -kappa t / 2 + B_t`; crossings happen when `|B* - anchor|`
/// reaches `sqrt(T/n)`, so the discounted price hits
/// `exp(+/- kappa sqrt(T/n))` times its previous crossing level.
pub fn simulate_embedding(
    bs: &BsParams,
    n: usize,
    cfg: &EmbedConfig,
    rng: &mut ChaCha8Rng,
) -> EmbeddedPath {
    let h = (bs.maturity / n as f64).sqrt();
    let dt = bs.maturity / (n as f64 * cfg.fine_per_step as f64);
    let sq = dt.sqrt();
    let cap = cfg.cap_factor * bs.maturity;
    let mut thetas = vec![0.0];
    let mut signs = Vec::with_capacity(n);
    let mut bstars = vec![0.0];
    let mut b = 0.0f64;
    let mut t = 0.0f64;
    let mut anchor = 0.0f64;
    let mut padded = false;
    while signs.len() < n {
        if t >= cap {
            padded = true;
            break;
        }
        let z: f64 = rng.sample(StandardNormal);
        b += -bs.vol / 2.0 * dt + sq * z;
        t += dt;
        if (b - anchor).abs() >= h {
            signs.push(if b > anchor { 1 } else { -1 });
            thetas.push(t);
            bstars.push(b);
            anchor = b;
        }
    }
    if padded {
        while signs.len() < n {
            signs.push(if rng.random::<bool>() { 1 } else { -1 });
            thetas.push(cap);
            bstars.push(anchor);
        }
    }
    EmbeddedPath {
        thetas,
        signs,
        bstar_at_thetas: bstars,
        padded,
    }
}

/// Evaluate the table's rational rules on an embedded path and return the
/// transported times `(theta_{mu}, theta_{nu})`; the padded flag
/// propagates.
pub fn transport_times<T: StrategyTable>(
    table: &T,
    path: &EmbeddedPath,
) -> (f64, f64, bool) {
    let mu = first_stop(table, &path.signs, true);
    let nu = first_stop(table, &path.signs, false);
    (path.thetas[mu], path.thetas[nu], path.padded)
}

/// Frequencies of the first embedded increment's sign against the lattice
/// up-probability.
#[derive(Clone, Copy, Debug)]
pub struct FirstIncrementStats {
    pub paths: usize,
    pub up_fraction: f64,
    pub expected: f64,
    /// Binomial standard deviation of the frequency.
    pub sigma: f64,
    pub padded: usize,
}

/// Simulate the first embedded increment on many paths.
pub fn first_increment_stats(
    bs: &BsParams,
    n: usize,
    cfg: &EmbedConfig,
    paths: usize,
    seed: u64,
) -> Result<FirstIncrementStats> {
    let disc = crate::tree::bs_to_crr(bs.rate, bs.vol, bs.maturity, n)?;
    let h = (bs.maturity / n as f64).sqrt();
    let results: Vec<(bool, bool)> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let dt = bs.maturity / (n as f64 * cfg.fine_per_step as f64);
            let sq = dt.sqrt();
            let cap = cfg.cap_factor * bs.maturity;
            let mut b = 0.0f64;
            let mut t = 0.0f64;
            while t < cap {
                let z: f64 = rng.sample(StandardNormal);
                b += -bs.vol / 2.0 * dt + sq * z;
                t += dt;
                if b.abs() >= h {
                    return (b > 0.0, false);
                }
            }
            (false, true)
        })
        .collect();
    let padded = results.iter().filter(|(_, p)| *p).count();
    let used = results.len() - padded;
    let ups = results.iter().filter(|(u, p)| *u && !p).count();
    let up_fraction = ups as f64 / used.max(1) as f64;
    let expected = disc.prob_up;
    let sigma = (expected * (1.0 - expected) / used.max(1) as f64).sqrt();
    Ok(FirstIncrementStats {
        paths,
        up_fraction,
        expected,
        sigma,
        padded,
    })
}

/// Streaming payoff evaluation from the running `(t, price, running max)`
/// state; only the Markov payoff classes are supported by the Monte Carlo
/// drivers.
#[derive(Clone, Debug)]
enum StreamPayoff {
    PriceOnly(PayoffSpec),
    Russian { floor: f64, pen_rate: f64 },
}

impl StreamPayoff {
    fn from_spec(payoff: &PayoffSpec) -> Result<StreamPayoff> {
        match payoff.markov_class() {
            MarkovClass::PriceOnly => Ok(StreamPayoff::PriceOnly(payoff.clone())),
            MarkovClass::MaxHomogeneous => match payoff {
                PayoffSpec::Russian { floor, pen_rate } => Ok(StreamPayoff::Russian {
                    floor: *floor,
                    pen_rate: *pen_rate,
                }),
                _ => unreachable!("max-homogeneous payoffs are Russian"),
            },
            MarkovClass::PathDependent => Err(Error::InvalidParameter(
                "Monte Carlo drivers need a Markov payoff class".into(),
            )),
        }
    }

    fn holder(&self, t: f64, price: f64, running_max: f64) -> f64 {
        match self {
            StreamPayoff::PriceOnly(spec) => {
                let times = [t];
                let prices = [price];
                spec.holder(&crate::payoff::PathSlice::new(&times, &prices))
            }
            StreamPayoff::Russian { floor, .. } => floor.max(running_max),
        }
    }

    fn cancel(&self, t: f64, price: f64, running_max: f64) -> f64 {
        match self {
            StreamPayoff::PriceOnly(spec) => {
                let times = [t];
                let prices = [price];
                let slice = crate::payoff::PathSlice::new(&times, &prices);
                spec.holder(&slice) + spec.penalty(&slice)
            }
            StreamPayoff::Russian { floor, pen_rate } => {
                floor.max(running_max) + pen_rate * price
            }
        }
    }
}

/// Monte Carlo estimate of the discounted payoff at the transported
/// rational exercise times.
#[derive(Clone, Copy, Debug)]
pub struct McValueReport {
    pub estimate: f64,
    pub std_error: f64,
    /// Lattice price `V^(n)` the estimate is compared against.
    pub lattice_value: f64,
    pub gap: f64,
    pub used_paths: usize,
    pub padded_paths: usize,
}

/// Estimate `E[Q(phi*, psi*)]` over embedded paths: simulate until the
/// first contact-set hit of either player, pay the holder leg on ties and
/// at maturity, the cancel leg when the seller is strictly first, and
/// discount at the resolution time.  Padded paths are excluded and
/// counted.
pub fn mc_value_check<T: StrategyTable + Sync>(
    table: &T,
    lattice_value: f64,
    payoff: &PayoffSpec,
    bs: &BsParams,
    cfg: &EmbedConfig,
    paths: usize,
    seed: u64,
) -> Result<McValueReport> {
    let stream = StreamPayoff::from_spec(payoff)?;
    let n = table.steps();
    let h = (bs.maturity / n as f64).sqrt();
    let samples: Vec<Option<f64>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let dt = bs.maturity / (n as f64 * cfg.fine_per_step as f64);
            let sq = dt.sqrt();
            let cap = cfg.cap_factor * bs.maturity;
            let mut cur = table.root();
            let mut b = 0.0f64;
            let mut t = 0.0f64;
            let mut anchor = 0.0f64;
            let mut price = bs.spot;
            let mut running_max = bs.spot;
            let mut crossings = 0usize;
            // resolution at theta_0 = 0
            if table.buyer_stops(&cur) {
                return Some(stream.holder(0.0, price, running_max));
            }
            if table.seller_stops(&cur) {
                return Some(stream.cancel(0.0, price, running_max));
            }
            loop {
                if t >= cap {
                    return None;
                }
                let z: f64 = rng.sample(StandardNormal);
                b += -bs.vol / 2.0 * dt + sq * z;
                t += dt;
                price = bs.spot * (bs.rate * t + bs.vol * b).exp();
                running_max = running_max.max(price);
                if (b - anchor).abs() >= h {
                    let sign: Sign = if b > anchor { 1 } else { -1 };
                    anchor = b;
                    crossings += 1;
                    cur = table.advance(&cur, sign);
                    let disc = (-bs.rate * t).exp();
                    if table.buyer_stops(&cur) {
                        return Some(disc * stream.holder(t, price, running_max));
                    }
                    if table.seller_stops(&cur) {
                        return Some(disc * stream.cancel(t, price, running_max));
                    }
                    debug_assert!(crossings < n, "terminal states always stop");
                }
            }
        })
        .collect();
    let used: Vec<f64> = samples.iter().flatten().cloned().collect();
    let padded = samples.len() - used.len();
    if used.is_empty() {
        return Err(Error::IllPosed("all Monte Carlo paths were padded".into()));
    }
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    let var = used.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (used.len().saturating_sub(1)).max(1) as f64;
    let std_error = (var / used.len() as f64).sqrt();
    Ok(McValueReport {
        estimate: mean,
        std_error,
        lattice_value,
        gap: (mean - lattice_value).abs(),
        used_paths: used.len(),
        padded_paths: padded,
    })
}

/// Monte Carlo estimate of the expected maximal shortfall of the
/// transported hedge.
#[derive(Clone, Copy, Debug)]
pub struct McShortfallReport {
    pub estimate: f64,
    pub std_error: f64,
    pub used_paths: usize,
}

/// Roll the piecewise-constant portfolio from the table through the
/// simulated price and average the pathwise suprema of
/// `(H(theta_phi, t) - W_{theta_phi /\ t})^+`, monitored on the fine
/// grid over `[0, T]`.
pub fn mc_hedge_shortfall<T: StrategyTable + Sync>(
    table: &T,
    payoff: &PayoffSpec,
    bs: &BsParams,
    cfg: &EmbedConfig,
    paths: usize,
    seed: u64,
) -> Result<McShortfallReport> {
    let stream = StreamPayoff::from_spec(payoff)?;
    let n = table.steps();
    let h = (bs.maturity / n as f64).sqrt();
    let samples: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let dt = bs.maturity / (n as f64 * cfg.fine_per_step as f64);
            let sq = dt.sqrt();
            let mut cur = table.root();
            let mut b = 0.0f64;
            let mut t = 0.0f64;
            let mut anchor = 0.0f64;
            let mut price = bs.spot;
            let mut running_max = bs.spot;
            let mut sup = 0.0f64;
            if table.seller_stops(&cur) {
                // cancelled immediately: the obligation is the cancel leg
                let w0 = table.initial_wealth();
                let g0 = stream.cancel(0.0, price, running_max);
                let f0 = stream.holder(0.0, price, running_max);
                return (g0 - w0).max(f0 - w0).max(0.0);
            }
            let (mut bond, mut shares) = table.holdings(&cur);
            sup = sup.max(stream.holder(0.0, price, running_max) - table.initial_wealth());
            while t < bs.maturity {
                let z: f64 = rng.sample(StandardNormal);
                b += -bs.vol / 2.0 * dt + sq * z;
                t += dt;
                price = bs.spot * (bs.rate * t + bs.vol * b).exp();
                running_max = running_max.max(price);
                let wealth = bond * (bs.rate * t).exp() + shares * price;
                sup = sup.max(stream.holder(t, price, running_max) - wealth);
                if (b - anchor).abs() >= h {
                    let sign: Sign = if b > anchor { 1 } else { -1 };
                    anchor = b;
                    cur = table.advance(&cur, sign);
                    if table.seller_stops(&cur) {
                        // the seller cancels here: obligations at later
                        // times are frozen at the cancel leg and wealth
                        sup = sup.max(stream.cancel(t, price, running_max) - wealth);
                        break;
                    }
                    let (nb, ns) = table.holdings(&cur);
                    bond = nb;
                    shares = ns;
                }
            }
            sup.max(0.0)
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / samples.len().max(1) as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (samples.len().saturating_sub(1)).max(1) as f64;
    Ok(McShortfallReport {
        estimate: mean,
        std_error: (var / samples.len().max(1) as f64).sqrt(),
        used_paths: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::recombining::price_only_lattice;
    use crate::tree::bs_to_crr;

    fn bs() -> BsParams {
        BsParams {
            spot: 100.0,
            rate: 0.04,
            vol: 0.25,
            maturity: 1.0,
        }
    }

    #[test]
    fn embedding_increments_reach_the_threshold() {
        let bs = bs();
        let n = 16;
        let cfg = EmbedConfig {
            fine_per_step: 200,
            cap_factor: 4.0,
        };
        let mut rng = path_rng(7, 0);
        let path = simulate_embedding(&bs, n, &cfg, &mut rng);
        assert!(!path.padded);
        assert_eq!(path.signs.len(), n);
        assert_eq!(path.thetas.len(), n + 1);
        let h = (bs.maturity / n as f64).sqrt();
        let dt_fine = bs.maturity / (n as f64 * 200.0);
        for k in 0..n {
            let inc = path.bstar_at_thetas[k + 1] - path.bstar_at_thetas[k];
            assert!(inc.abs() >= h, "increment below threshold");
            assert!(
                inc.abs() <= h + 8.0 * dt_fine.sqrt(),
                "overshoot beyond grid tolerance: {} vs {}",
                inc.abs(),
                h
            );
            assert_eq!(path.signs[k], if inc > 0.0 { 1 } else { -1 });
        }
        // deterministic for a fixed seed and stream
        let mut rng2 = path_rng(7, 0);
        let path2 = simulate_embedding(&bs, n, &cfg, &mut rng2);
        assert_eq!(path.thetas, path2.thetas);
        assert_eq!(path.signs, path2.signs);
    }

    #[test]
    fn short_cap_pads_and_flags() {
        // the crossings need about T of clock time in total; a cap well
        // below that leaves the sequence incomplete and the path flagged
        let bs = BsParams {
            spot: 100.0,
            rate: 0.0,
            vol: 0.2,
            maturity: 1.0,
        };
        let cfg = EmbedConfig {
            fine_per_step: 100,
            cap_factor: 0.02,
        };
        let mut rng = path_rng(9, 3);
        let path = simulate_embedding(&bs, 4, &cfg, &mut rng);
        assert!(path.padded);
        assert_eq!(path.signs.len(), 4);
        assert_eq!(path.thetas.len(), 5);
    }

    #[test]
    fn transported_times_follow_the_rules() {
        let disc = bs_to_crr(0.04, 0.25, 1.0, 8).unwrap();
        let payoff = PayoffSpec::Constant {
            value: 3.0,
            penalty: 0.0,
        };
        let lattice = price_only_lattice(&payoff, &disc, 100.0, true).unwrap();
        let mut rng = path_rng(11, 2);
        let path = simulate_embedding(&bs(), 8, &EmbedConfig::default(), &mut rng);
        let (phi, psi, padded) = transport_times(&lattice, &path);
        assert!(!padded);
        assert_eq!(phi, 0.0);
        assert_eq!(psi, 0.0);
    }

    #[test]
    fn constant_payoff_mc_value_is_exact() {
        let bs = bs();
        let n = 8;
        let disc = bs_to_crr(bs.rate, bs.vol, bs.maturity, n).unwrap();
        let payoff = PayoffSpec::Constant {
            value: 3.0,
            penalty: 0.0,
        };
        let lattice = price_only_lattice(&payoff, &disc, bs.spot, true).unwrap();
        let report = mc_value_check(
            &lattice,
            lattice.value,
            &payoff,
            &bs,
            &EmbedConfig::default(),
            500,
            42,
        )
        .unwrap();
        assert_eq!(report.estimate, 3.0);
        assert_eq!(report.std_error, 0.0);
        assert_eq!(report.padded_paths, 0);
        // shortfall of the all-bond hedge is identically zero
        let sf = mc_hedge_shortfall(&lattice, &payoff, &bs, &EmbedConfig::default(), 200, 42)
            .unwrap();
        assert_eq!(sf.estimate, 0.0);
    }

    #[test]
    fn mc_runs_are_reproducible_for_a_seed() {
        let bs = bs();
        let n = 8;
        let disc = bs_to_crr(bs.rate, bs.vol, bs.maturity, n).unwrap();
        let payoff = PayoffSpec::VanillaPut {
            strike: 100.0,
            penalty: 2.0,
        };
        let lattice = price_only_lattice(&payoff, &disc, bs.spot, true).unwrap();
        let cfg = EmbedConfig {
            fine_per_step: 100,
            cap_factor: 4.0,
        };
        let a = mc_value_check(&lattice, lattice.value, &payoff, &bs, &cfg, 400, 123).unwrap();
        let b = mc_value_check(&lattice, lattice.value, &payoff, &bs, &cfg, 400, 123).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.std_error, b.std_error);
        let c = mc_hedge_shortfall(&lattice, &payoff, &bs, &cfg, 300, 5).unwrap();
        let d = mc_hedge_shortfall(&lattice, &payoff, &bs, &cfg, 300, 5).unwrap();
        assert_eq!(c.estimate, d.estimate);
    }
}
