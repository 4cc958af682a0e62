//! Subcommand implementations: load a config, run the core machinery,
//! and emit reports.

use std::path::Path;

use serde_json::json;

use gamehedge::bridge::{self, BsParams, EmbedConfig};
use gamehedge::dynkin::StoppingRule;
use gamehedge::fileio::TxInstanceFile;
use gamehedge::game_option::{self, GameOptionInstance};
use gamehedge::payoff::{MarkovClass, PathPayoff, PayoffSpec};
use gamehedge::shortfall::{shortfall_dp, DpBackend, ShortfallConfig, ShortfallProblem};
use gamehedge::swing::{self, ClaimPayoffs, SwingSpec};
use gamehedge::tree::{dfs_nodes, NodeId};
use gamehedge::txcost::{self, Side};
use gamehedge::{Error, Result};

use crate::config::{
    ConvergeConfig, EmbedMcConfig, PriceConfig, ShortfallCliConfig, SwingConfig,
};
use crate::report::{csv_table, sig12, write_atomic, write_json};

fn stop_summary(rule: &StoppingRule, tree: &gamehedge::tree::EventTree) -> serde_json::Value {
    let mut earliest = usize::MAX;
    let mut latest = 0usize;
    let mut mean = 0.0f64;
    for (terminal, prob) in tree.paths() {
        let t = rule.stop_time(terminal);
        earliest = earliest.min(t);
        latest = latest.max(t);
        mean += prob * t as f64;
    }
    json!({ "earliest": earliest, "latest": latest, "mean": mean })
}

pub fn price(cfg: &PriceConfig, out: &Path) -> Result<()> {
    let (params, dt) = cfg.market.to_crr()?;
    let inst = GameOptionInstance::build_with(
        params,
        &cfg.payoff,
        dt,
        !cfg.keep_terminal_penalty,
    )?;
    let priced = game_option::price(&inst)?;
    let (sigma, tau) = game_option::rational_times(&inst, &priced)?;
    let hedge = game_option::extract_hedge(&inst, &sigma)?;
    let worst = game_option::verify_hedge(&inst, &hedge, &sigma);

    // hedge table CSV: node, bond units, shares over the next step
    let n = params.steps;
    let mut rows = Vec::new();
    for node in dfs_nodes(n.saturating_sub(1)) {
        rows.push(vec![
            prefix_of(node),
            sig12(*hedge.bond.get(node)),
            sig12(*hedge.stock.get(node)),
        ]);
    }
    let hedge_path = write_atomic(
        out,
        "hedge_table.csv",
        &csv_table(&["prefix", "bond", "shares"], &rows),
    )?;
    if cfg.dump_values {
        let mut rows = Vec::new();
        for node in dfs_nodes(n) {
            rows.push(vec![
                prefix_of(node),
                sig12(*priced.discounted.values.get(node)),
            ]);
        }
        write_atomic(
            out,
            "value_surface.csv",
            &csv_table(&["prefix", "discounted_value"], &rows),
        )?;
    }
    write_json(
        out,
        "price_report.json",
        &json!({
            "config": cfg,
            "value": priced.value,
            "seller_stop": stop_summary(&sigma, &inst.tree),
            "buyer_stop": stop_summary(&tau, &inst.tree),
            "hedge": {
                "initial_wealth": hedge.initial_wealth,
                "worst_shortfall": worst,
                "table": hedge_path.display().to_string(),
            },
        }),
    )?;
    println!("price: {}", priced.value);
    Ok(())
}

fn prefix_of(node: NodeId) -> String {
    let s: String = node
        .signs()
        .iter()
        .map(|&x| if x > 0 { '+' } else { '-' })
        .collect();
    s
}

pub fn swing_cmd(cfg: &SwingConfig, out: &Path) -> Result<()> {
    let (params, dt) = cfg.market.to_crr()?;
    let mut claims = Vec::with_capacity(cfg.claims.len());
    for payoff in &cfg.claims {
        let inst = GameOptionInstance::build(params, payoff, dt)?;
        let (upper, lower) = inst.discounted();
        claims.push(ClaimPayoffs { upper, lower });
    }
    let disc_stock = {
        let prices = params.price_process();
        prices.map(|node, s| params.discount(node.t) * s)
    };
    let spec = SwingSpec::new(params.event_tree(), disc_stock, claims)?;
    let sol = swing::solve_swing(&spec)?;
    let (seller, buyer) = swing::optimal_strategies(&spec, &sol);
    let portfolio = swing::swing_hedge(&spec, &sol)?;
    let min_wealth = swing::verify_hedge_wealth(&spec, &portfolio, &seller);
    let (pair_value, transcripts) = swing::play(&spec, &seller, &buyer);
    if cfg.dump_transcripts {
        let mut rows = Vec::new();
        for tr in &transcripts {
            for (i, s) in tr.settlements.iter().enumerate() {
                rows.push(vec![
                    prefix_of(tr.terminal),
                    sig12(tr.prob),
                    (i + 1).to_string(),
                    s.seller_time.to_string(),
                    s.buyer_time.to_string(),
                    sig12(s.payment),
                ]);
            }
        }
        write_atomic(
            out,
            "swing_transcripts.csv",
            &csv_table(
                &["path", "prob", "claim", "seller_time", "buyer_time", "payment"],
                &rows,
            ),
        )?;
    }
    // strategy tables: per layer, the contact-set prefixes of each player
    let contact_prefixes = |strategy: &swing::HittingStrategy| -> Vec<Vec<String>> {
        strategy
            .flags
            .iter()
            .map(|flags| {
                flags
                    .nodes()
                    .filter(|n| *flags.get(*n))
                    .map(prefix_of)
                    .collect()
            })
            .collect()
    };
    write_json(
        out,
        "swing_report.json",
        &json!({
            "config": cfg,
            "value": sol.price(),
            "per_layer_values": sol
                .layers
                .iter()
                .map(|l| l.values.get(NodeId::ROOT))
                .collect::<Vec<_>>(),
            "optimal_pair_value": pair_value,
            "hedge_min_wealth": min_wealth,
            "seller_contact_sets": contact_prefixes(&seller),
            "buyer_contact_sets": contact_prefixes(&buyer),
        }),
    )?;
    println!("swing value: {} (discounted units)", sol.price());
    Ok(())
}

pub fn shortfall_cmd(cfg: &ShortfallCliConfig, out: &Path) -> Result<()> {
    let (params, dt) = cfg.market.to_crr()?;
    let inst = GameOptionInstance::build(params, &cfg.payoff, dt)?;
    let price = game_option::price(&inst)?.value;
    let backend = match cfg.backend.as_str() {
        "grid" => DpBackend::Grid,
        "exact" => DpBackend::Exact,
        other => {
            return Err(Error::InvalidParameter(format!(
                "backend must be \"grid\" or \"exact\", got {other}"
            )))
        }
    };
    let shortfall_cfg = ShortfallConfig {
        wealth_points: cfg.wealth_points,
        gamma_points: cfg.gamma_points,
        include_replication: true,
    };
    let capitals: Vec<f64> = match (&cfg.sweep, cfg.capital) {
        (Some(sweep), _) => (0..sweep.points)
            .map(|i| {
                sweep.from
                    + (sweep.to - sweep.from) * i as f64 / (sweep.points - 1).max(1) as f64
            })
            .collect(),
        (None, Some(x)) => vec![x],
        (None, None) => {
            return Err(Error::InvalidParameter(
                "shortfall needs either capital or a sweep".into(),
            ))
        }
    };
    let mut rows = Vec::new();
    let mut risks = Vec::new();
    for &x in &capitals {
        let problem = ShortfallProblem::from_instance(&inst, x, &shortfall_cfg)?;
        let report = shortfall_dp(&problem, backend)?;
        rows.push(vec![sig12(x), sig12(report.risk)]);
        risks.push(report.risk);
    }
    write_atomic(out, "shortfall_sweep.csv", &csv_table(&["capital", "risk"], &rows))?;
    write_json(
        out,
        "shortfall_report.json",
        &json!({
            "config": cfg,
            "fair_price": price,
            "capitals": capitals,
            "risks": risks,
        }),
    )?;
    println!("shortfall risk at the listed capitals written to shortfall_sweep.csv");
    Ok(())
}

pub fn converge_cmd(cfg: &ConvergeConfig, out: &Path) -> Result<()> {
    let (bs, _) = cfg.market.to_bs()?;
    let points = bridge::price_sequence(&cfg.payoff, &bs, &cfg.lattices);
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for p in &points {
        match &p.value {
            Ok(v) => pairs.push((p.steps, *v)),
            Err(e) => failures.push(json!({ "steps": p.steps, "error": e })),
        }
    }
    let reference = bridge::price_lattice(&cfg.payoff, &bs, cfg.reference)?;
    let report = bridge::convergence_report(&pairs, cfg.reference, reference, cfg.fit_max)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.steps.to_string(),
                sig12(r.value),
                sig12(r.error),
                sig12(r.envelope),
                r.within.to_string(),
            ]
        })
        .collect();
    write_atomic(
        out,
        "convergence.csv",
        &csv_table(&["steps", "value", "error", "envelope", "within"], &rows),
    )?;
    write_json(
        out,
        "converge_report.json",
        &json!({
            "config": cfg,
            "c_hat": report.c_hat,
            "reference_steps": report.reference_steps,
            "reference_value": report.reference_value,
            "violations": report.violations,
            "failures": failures,
        }),
    )?;
    println!(
        "fitted envelope constant {} over {} lattices (reference {})",
        report.c_hat,
        report.rows.len(),
        cfg.reference
    );
    Ok(())
}

pub fn embed_mc_cmd(cfg: &EmbedMcConfig, out: &Path) -> Result<()> {
    let seed = cfg.seed.ok_or_else(|| {
        Error::InvalidParameter("embed-mc needs an explicit seed for reproducibility".into())
    })?;
    let (bs, steps) = cfg.market.to_bs()?;
    let embed = EmbedConfig {
        fine_per_step: cfg.fine_per_step,
        cap_factor: cfg.cap_factor,
    };
    if cfg.fine_per_step < 100 {
        log::warn!(
            "fine_per_step {} is below the recommended floor of 100",
            cfg.fine_per_step
        );
    }
    let disc = gamehedge::tree::bs_to_crr(bs.rate, bs.vol, bs.maturity, steps)?;
    let (value_mc, shortfall) = match cfg.payoff.markov_class() {
        MarkovClass::PriceOnly => {
            let table = bridge::price_only_lattice(&cfg.payoff, &disc, bs.spot, true)?;
            run_mc(&table, &cfg.payoff, &bs, &embed, cfg, seed)?
        }
        MarkovClass::MaxHomogeneous => match &cfg.payoff {
            PayoffSpec::Russian { floor, pen_rate } if *floor <= bs.spot => {
                let table = bridge::russian_lattice(*floor, *pen_rate, &disc, bs.spot, true)?;
                run_mc(&table, &cfg.payoff, &bs, &embed, cfg, seed)?
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "Russian payoffs need floor <= spot for the Monte Carlo driver".into(),
                ))
            }
        },
        MarkovClass::PathDependent => {
            return Err(Error::InvalidParameter(
                "embed-mc needs a Markov payoff class (price-only or Russian)".into(),
            ))
        }
    };
    let mut rows = vec![vec![
        "value".to_string(),
        sig12(value_mc.estimate),
        sig12(value_mc.std_error),
    ]];
    if let Some(sf) = &shortfall {
        rows.push(vec![
            "max_shortfall".to_string(),
            sig12(sf.0.estimate),
            sig12(sf.0.std_error),
        ]);
        rows.push(vec![
            "max_shortfall_halved_grid".to_string(),
            sig12(sf.1.estimate),
            sig12(sf.1.std_error),
        ]);
    }
    write_atomic(
        out,
        "embed_mc.csv",
        &csv_table(&["quantity", "estimate", "std_error"], &rows),
    )?;
    write_json(
        out,
        "embed_mc_report.json",
        &json!({
            "config": cfg,
            "lattice_value": value_mc.lattice_value,
            "estimate": value_mc.estimate,
            "std_error": value_mc.std_error,
            "gap": value_mc.gap,
            "used_paths": value_mc.used_paths,
            "padded_paths": value_mc.padded_paths,
            "shortfall": shortfall.as_ref().map(|sf| json!({
                "estimate": sf.0.estimate,
                "std_error": sf.0.std_error,
                "halved_grid_estimate": sf.1.estimate,
            })),
        }),
    )?;
    println!(
        "embedded MC estimate {} (lattice value {})",
        value_mc.estimate, value_mc.lattice_value
    );
    Ok(())
}

type McOutputs = (
    bridge::McValueReport,
    Option<(bridge::McShortfallReport, bridge::McShortfallReport)>,
);

fn run_mc<T: bridge::StrategyTable + Sync>(
    table: &T,
    payoff: &PayoffSpec,
    bs: &BsParams,
    embed: &EmbedConfig,
    cfg: &EmbedMcConfig,
    seed: u64,
) -> Result<McOutputs> {
    let lattice_value = table.initial_wealth();
    let value_mc =
        bridge::mc_value_check(table, lattice_value, payoff, bs, embed, cfg.paths, seed)?;
    let shortfall = if cfg.hedge_shortfall {
        let fine = EmbedConfig {
            fine_per_step: embed.fine_per_step * 2,
            cap_factor: embed.cap_factor,
        };
        Some((
            bridge::mc_hedge_shortfall(table, payoff, bs, embed, cfg.paths, seed)?,
            bridge::mc_hedge_shortfall(table, payoff, bs, &fine, cfg.paths, seed)?,
        ))
    } else {
        None
    };
    Ok((value_mc, shortfall))
}

pub fn txcost_cmd(instance_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(instance_path)?;
    let file = TxInstanceFile::from_toml(&text)?;
    let (market, payoff) = file.into_instance()?;
    let scale = payoff.scale(&market);
    let seller = txcost::seller_price(&market, &payoff)?;
    let buyer = txcost::buyer_price(&market, &payoff)?;
    let (sigma, seller_pf) = txcost::seller_superhedge(&market, &payoff, &seller)?;
    let seller_viol = txcost::verify_superhedge(Side::Seller, &market, &payoff, &sigma, &seller_pf);
    let (tau, buyer_pf) = txcost::buyer_superhedge(&market, &payoff, &buyer)?;
    let buyer_viol = txcost::verify_superhedge(Side::Buyer, &market, &payoff, &tau, &buyer_pf);
    // strategy dump: per node, positions entering the node
    let mut rows = Vec::new();
    for node in dfs_nodes(market.depth()) {
        rows.push(vec![
            prefix_of(node),
            sig12(*seller_pf.cash.get(node)),
            sig12(*seller_pf.shares.get(node)),
            sig12(*buyer_pf.cash.get(node)),
            sig12(*buyer_pf.shares.get(node)),
        ]);
    }
    write_atomic(
        out,
        "txcost_strategies.csv",
        &csv_table(
            &["prefix", "seller_cash", "seller_shares", "buyer_cash", "buyer_shares"],
            &rows,
        ),
    )?;
    write_json(
        out,
        "txcost_report.json",
        &json!({
            "instance": instance_path.display().to_string(),
            "seller_price": seller.value,
            "buyer_price": buyer.value,
            "seller_stop": stop_summary(&sigma, &market.tree),
            "buyer_stop": stop_summary(&tau, &market.tree),
            "verification": {
                "seller_worst_violation": seller_viol,
                "buyer_worst_violation": buyer_viol,
                "slack": 1e-9 * scale,
            },
        }),
    )?;
    println!(
        "seller price {} / buyer price {} (sweep violations {:.2e} / {:.2e})",
        seller.value, buyer.value, seller_viol, buyer_viol
    );
    Ok(())
}
