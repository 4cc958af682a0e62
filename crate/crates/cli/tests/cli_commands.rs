//! End-to-end runs of every subcommand on small instances: configs parse,
//! reports land on disk, and reruns are byte-identical.

use gamehedge_cli::config::{
    load_config, ConvergeConfig, EmbedMcConfig, PriceConfig, ShortfallCliConfig, SwingConfig,
};
use gamehedge_cli::{commands, gen};

fn write(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn price_command_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write(
        tmp.path(),
        "price.toml",
        r#"
dump_values = true

[market]
kind = "crr"
s0 = 100.0
up = 0.1
down = -0.1
rate = 0.02
steps = 6

[payoff]
kind = "vanilla_put"
strike = 100.0
penalty = 2.0
"#,
    );
    let cfg: PriceConfig = load_config(&cfg_path).unwrap();
    let out = tmp.path().join("out");
    commands::price(&cfg, &out).unwrap();
    for f in ["price_report.json", "hedge_table.csv", "value_surface.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("price_report.json")).unwrap())
            .unwrap();
    assert!(report["value"].as_f64().unwrap() > 0.0);
    // the report embeds the resolved config
    assert_eq!(report["config"]["payoff"]["kind"], "vanilla_put");
    // rerun is byte-identical
    let first = std::fs::read(out.join("price_report.json")).unwrap();
    commands::price(&cfg, &out).unwrap();
    assert_eq!(first, std::fs::read(out.join("price_report.json")).unwrap());
}

#[test]
fn swing_command_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write(
        tmp.path(),
        "swing.toml",
        r#"
dump_transcripts = true

[market]
kind = "crr"
s0 = 1.0
up = 0.2
down = -0.2
rate = 0.0
steps = 3

[[claims]]
kind = "vanilla_call"
strike = 1.0
penalty = 0.05

[[claims]]
kind = "vanilla_call"
strike = 1.0
penalty = 0.05
"#,
    );
    let cfg: SwingConfig = load_config(&cfg_path).unwrap();
    let out = tmp.path().join("out");
    commands::swing_cmd(&cfg, &out).unwrap();
    assert!(out.join("swing_report.json").exists());
    assert!(out.join("swing_transcripts.csv").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("swing_report.json")).unwrap())
            .unwrap();
    // two claims are worth at least one
    let layers = report["per_layer_values"].as_array().unwrap();
    assert_eq!(layers.len(), 2);
    assert!(layers[1].as_f64().unwrap() >= layers[0].as_f64().unwrap());
    assert!(report["hedge_min_wealth"].as_f64().unwrap() >= -1e-9);
}

#[test]
fn shortfall_command_sweeps_capital() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write(
        tmp.path(),
        "shortfall.toml",
        r#"
wealth_points = 801
gamma_points = 21
backend = "grid"

[market]
kind = "crr"
s0 = 1.0
up = 0.2
down = -0.2
rate = 0.0
steps = 2

[payoff]
kind = "vanilla_call"
strike = 1.0
penalty = 0.05

[sweep]
from = 0.0
to = 0.1
points = 6
"#,
    );
    let cfg: ShortfallCliConfig = load_config(&cfg_path).unwrap();
    let out = tmp.path().join("out");
    commands::shortfall_cmd(&cfg, &out).unwrap();
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("shortfall_report.json")).unwrap(),
    )
    .unwrap();
    let risks: Vec<f64> = report["risks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(risks.len(), 6);
    for pair in risks.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-9, "risk must decrease in capital");
    }
}

#[test]
fn converge_command_fits_the_envelope() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write(
        tmp.path(),
        "converge.toml",
        r#"
lattices = [8, 16, 32]
reference = 128
fit_max = 32

[market]
kind = "bs"
spot = 110.0
rate = 0.06
vol = 0.5
maturity = 0.5
steps = 64

[payoff]
kind = "vanilla_put"
strike = 100.0
penalty = 4.0
"#,
    );
    let cfg: ConvergeConfig = load_config(&cfg_path).unwrap();
    let out = tmp.path().join("out");
    commands::converge_cmd(&cfg, &out).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("converge_report.json")).unwrap())
            .unwrap();
    assert!(report["c_hat"].as_f64().unwrap() > 0.0);
    assert!(out.join("convergence.csv").exists());
}

#[test]
fn embed_mc_requires_a_seed_and_runs_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let base = r#"
paths = 200
fine_per_step = 100
hedge_shortfall = true

[market]
kind = "bs"
spot = 110.0
rate = 0.06
vol = 0.5
maturity = 0.5
steps = 8

[payoff]
kind = "vanilla_put"
strike = 100.0
penalty = 4.0
"#;
    let cfg_path = write(tmp.path(), "mc.toml", base);
    let cfg: EmbedMcConfig = load_config(&cfg_path).unwrap();
    let out = tmp.path().join("out");
    // missing seed is a configuration error
    let err = commands::embed_mc_cmd(&cfg, &out).unwrap_err();
    assert!(err.to_string().contains("seed"), "{err}");
    let cfg_path = write(tmp.path(), "mc2.toml", &format!("seed = 11\n{base}"));
    let cfg: EmbedMcConfig = load_config(&cfg_path).unwrap();
    commands::embed_mc_cmd(&cfg, &out).unwrap();
    let first = std::fs::read(out.join("embed_mc.csv")).unwrap();
    commands::embed_mc_cmd(&cfg, &out).unwrap();
    assert_eq!(first, std::fs::read(out.join("embed_mc.csv")).unwrap());
}

#[test]
fn txcost_command_prices_an_instance_file() {
    let tmp = tempfile::tempdir().unwrap();
    // build an instance through the library, persist it, run the command
    let mut rng = gen::rng(42);
    let market = gen::random_friction_market(&mut rng, 3, 0.08);
    let payoff = gen::random_tx_payoff(&mut rng, &market);
    let file = gamehedge::fileio::TxInstanceFile::from_instance(&market, &payoff);
    let path = write(tmp.path(), "instance.toml", &file.to_toml().unwrap());
    let out = tmp.path().join("out");
    commands::txcost_cmd(&path, &out).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("txcost_report.json")).unwrap())
            .unwrap();
    let seller = report["seller_price"].as_f64().unwrap();
    let buyer = report["buyer_price"].as_f64().unwrap();
    assert!(seller >= buyer - 1e-9);
    assert!(
        report["verification"]["seller_worst_violation"]
            .as_f64()
            .unwrap()
            <= 1e-9 * payoff.scale(&market)
    );
    assert!(out.join("txcost_strategies.csv").exists());
}

#[test]
fn malformed_config_names_the_offending_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write(
        tmp.path(),
        "bad.toml",
        r#"
[market]
kind = "crr"
s0 = 100.0
up = 0.1
down = -0.1
rate = 0.02
steps = 6

[payoff]
kind = "vanilla_put"
strike = "not a number"
penalty = 2.0
"#,
    );
    // tagged payoff sections report the offending section and position
    let err = load_config::<PriceConfig>(&cfg_path).unwrap_err();
    let msg = err.to_string();
    assert!(
        msg.contains("payoff") && msg.contains("line"),
        "diagnostic should locate the offender: {msg}"
    );
    // plain fields report the offending key itself
    let cfg_path = write(
        tmp.path(),
        "bad2.toml",
        r#"
wealth_points = "many"
capital = 0.5

[market]
kind = "crr"
s0 = 100.0
up = 0.1
down = -0.1
rate = 0.02
steps = 2

[payoff]
kind = "vanilla_put"
strike = 100.0
penalty = 2.0
"#,
    );
    let err = load_config::<ShortfallCliConfig>(&cfg_path).unwrap_err();
    let msg = err.to_string();
    assert!(
        msg.contains("wealth_points"),
        "diagnostic should name the key: {msg}"
    );
}
