//! The `selftest` subcommand: run the battery, print one line per
//! criterion, and write the deterministic reports.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use gamehedge::Result;

use crate::criteria::{BatteryConfig, CriterionResult};
use crate::report;

#[derive(Serialize)]
struct BatteryReport<'a> {
    seed: u64,
    quick: bool,
    passed: bool,
    criteria: &'a [CriterionResult],
}

/// Write the battery reports: a JSON summary with the resolved
/// configuration and a CSV table, both deterministic for a fixed seed.
pub fn write_battery_reports(
    dir: &Path,
    cfg: &BatteryConfig,
    results: &[CriterionResult],
) -> Result<()> {
    let passed = results.iter().all(|r| r.passed);
    report::write_json(
        dir,
        "selftest_report.json",
        &BatteryReport {
            seed: cfg.seed,
            quick: cfg.quick,
            passed,
            criteria: results,
        },
    )?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.id.to_string(),
                r.name.to_string(),
                if r.passed { "pass" } else { "fail" }.to_string(),
                r.details.clone(),
            ]
        })
        .collect();
    report::write_atomic(
        dir,
        "criteria.csv",
        &report::csv_table(&["id", "name", "status", "details"], &rows),
    )?;
    Ok(())
}

/// Write the convergence tables produced by the bridge criteria, so the
/// acceptance artifacts are inspectable.
pub fn write_bridge_reports(dir: &Path, cfg: &BatteryConfig) -> Result<()> {
    let art = crate::criteria::bridge_artifacts(cfg);
    for (name, rep) in [
        ("convergence_put.csv", &art.put_report),
        ("convergence_russian.csv", &art.russian_report),
    ] {
        let rows: Vec<Vec<String>> = rep
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.steps.to_string(),
                    report::sig12(r.value),
                    report::sig12(r.error),
                    report::sig12(r.envelope),
                    r.within.to_string(),
                ]
            })
            .collect();
        report::write_atomic(
            dir,
            name,
            &report::csv_table(&["steps", "value", "error", "envelope", "within"], &rows),
        )?;
    }
    report::write_json(
        dir,
        "bridge_mc.json",
        &json!({
            "market": {
                "spot": art.bs.spot, "rate": art.bs.rate,
                "vol": art.bs.vol, "maturity": art.bs.maturity,
            },
            "steps": art.mc_steps,
            "paths": art.mc_paths,
            "value_mc": {
                "estimate": art.value_mc.estimate,
                "std_error": art.value_mc.std_error,
                "lattice_value": art.value_mc.lattice_value,
                "padded_paths": art.value_mc.padded_paths,
            },
            "shortfall_mc": {
                "estimate": art.shortfall_mc.estimate,
                "std_error": art.shortfall_mc.std_error,
                "halved_grid_estimate": art.shortfall_mc_fine.estimate,
            },
            "first_increments": {
                "up_fraction": art.first_increments.up_fraction,
                "expected": art.first_increments.expected,
            },
        }),
    )?;
    Ok(())
}

/// Run the battery and persist the reports; returns whether all criteria
/// passed.
pub fn run(dir: &Path, seed: u64, quick: bool) -> Result<bool> {
    let cfg = BatteryConfig { seed, quick };
    let results = crate::criteria::run_battery(&cfg, true);
    write_battery_reports(dir, &cfg, &results)?;
    write_bridge_reports(dir, &cfg)?;
    let passed = results.iter().all(|r| r.passed);
    println!(
        "selftest: {}/{} criteria passed",
        results.iter().filter(|r| r.passed).count(),
        results.len()
    );
    Ok(passed)
}
