//! Configuration schemas for the subcommands (TOML, key-value).
//!
//! Reports echo the full resolved configuration for provenance.

use serde::{Deserialize, Serialize};

use gamehedge::bridge::BsParams;
use gamehedge::payoff::PayoffSpec;
use gamehedge::tree::{bs_to_crr, CrrParams};
use gamehedge::{Error, Result};

/// Market parameterization: explicit CRR returns or a Black-Scholes model
/// discretized into `steps` periods.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarketConfig {
    Crr {
        s0: f64,
        up: f64,
        down: f64,
        rate: f64,
        steps: usize,
        /// Physical time per lattice step (payoff clock).
        #[serde(default = "default_dt")]
        dt: f64,
    },
    Bs {
        spot: f64,
        rate: f64,
        vol: f64,
        maturity: f64,
        steps: usize,
    },
}

fn default_dt() -> f64 {
    1.0
}

impl MarketConfig {
    /// Resolve into CRR parameters plus the lattice clock.
    pub fn to_crr(&self) -> Result<(CrrParams, f64)> {
        match self {
            MarketConfig::Crr {
                s0,
                up,
                down,
                rate,
                steps,
                dt,
            } => {
                if !(*dt > 0.0) {
                    return Err(Error::InvalidParameter("dt must be positive".into()));
                }
                Ok((CrrParams::new(*s0, *up, *down, *rate, *steps)?, *dt))
            }
            MarketConfig::Bs {
                spot,
                rate,
                vol,
                maturity,
                steps,
            } => {
                let disc = bs_to_crr(*rate, *vol, *maturity, *steps)?;
                Ok((disc.to_crr(*spot)?, disc.dt()))
            }
        }
    }

    pub fn to_bs(&self) -> Result<(BsParams, usize)> {
        match self {
            MarketConfig::Bs {
                spot,
                rate,
                vol,
                maturity,
                steps,
            } => Ok((
                BsParams {
                    spot: *spot,
                    rate: *rate,
                    vol: *vol,
                    maturity: *maturity,
                },
                *steps,
            )),
            MarketConfig::Crr { .. } => Err(Error::InvalidParameter(
                "this subcommand needs a Black-Scholes market (kind = \"bs\")".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PriceConfig {
    pub market: MarketConfig,
    pub payoff: PayoffSpec,
    /// Keep the raw cancellation leg at maturity instead of forcing the
    /// penalty to zero there.
    #[serde(default)]
    pub keep_terminal_penalty: bool,
    /// Dump the discounted value surface as CSV.
    #[serde(default)]
    pub dump_values: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SwingConfig {
    pub market: MarketConfig,
    pub claims: Vec<PayoffSpec>,
    /// Dump per-path transcripts of the optimal strategy pair.
    #[serde(default)]
    pub dump_transcripts: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShortfallCliConfig {
    pub market: MarketConfig,
    pub payoff: PayoffSpec,
    /// Single capital to evaluate; the sweep takes precedence when given.
    #[serde(default)]
    pub capital: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_wealth_points")]
    pub wealth_points: usize,
    #[serde(default = "default_gamma_points")]
    pub gamma_points: usize,
    /// `grid` (default) or `exact`.
    #[serde(default = "default_backend")]
    pub backend: String,
}

fn default_wealth_points() -> usize {
    401
}

fn default_gamma_points() -> usize {
    101
}

fn default_backend() -> String {
    "grid".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergeConfig {
    pub market: MarketConfig,
    pub payoff: PayoffSpec,
    pub lattices: Vec<usize>,
    pub reference: usize,
    #[serde(default = "default_fit_max")]
    pub fit_max: usize,
}

fn default_fit_max() -> usize {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbedMcConfig {
    pub market: MarketConfig,
    pub payoff: PayoffSpec,
    pub paths: usize,
    /// Seed is mandatory: every randomized run must be reproducible.
    pub seed: Option<u64>,
    #[serde(default = "default_fine")]
    pub fine_per_step: usize,
    #[serde(default = "default_cap")]
    pub cap_factor: f64,
    /// Also estimate the hedge shortfall and its grid sensitivity.
    #[serde(default)]
    pub hedge_shortfall: bool,
}

fn default_fine() -> usize {
    128
}

fn default_cap() -> f64 {
    4.0
}

pub fn load_config<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
