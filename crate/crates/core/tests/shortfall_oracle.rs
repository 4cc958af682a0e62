//! The shortfall dynamic program against the literal brute-force
//! enumeration, and the funded-seller zero-risk property on random
//! instances.

mod common;

use gamehedge::game_option::{self, GameOptionInstance};
use gamehedge::shortfall::{
    shortfall_brute, shortfall_dp, DpBackend, ShortfallConfig, ShortfallProblem,
};
use gamehedge::tree::Adapted;
use rand::Rng;

fn random_instance(rng: &mut rand_chacha::ChaCha8Rng, steps: usize) -> GameOptionInstance {
    let params = common::random_crr(rng, steps);
    let lower = Adapted::from_fn(steps, |_| rng.random_range(0.0..1.0));
    let upper = lower.map(|node, y| {
        if node.t == steps {
            *y
        } else {
            y + rng.random_range(0.0..0.4)
        }
    });
    GameOptionInstance::from_parts(params, upper, lower, 1.0).unwrap()
}

fn coarse() -> ShortfallConfig {
    ShortfallConfig {
        wealth_points: 4001,
        gamma_points: 3,
        include_replication: true,
    }
}

#[test]
fn dp_matches_brute_force_on_random_instances() {
    let mut rng = common::rng(0x5f01_0001);
    for round in 0..20 {
        let steps = rng.random_range(1..=3);
        let inst = random_instance(&mut rng, steps);
        let v = game_option::price(&inst).unwrap().value;
        let x = rng.random_range(0.0..(1.5 * v.max(0.05)));
        let problem = match ShortfallProblem::from_instance(&inst, x, &coarse()) {
            Ok(p) => p,
            Err(_) => continue, // capital above the wealth domain
        };
        let brute = shortfall_brute(&problem, 3, 1 << 22).unwrap();
        let exact = shortfall_dp(&problem, DpBackend::Exact).unwrap().risk;
        let grid = shortfall_dp(&problem, DpBackend::Grid).unwrap().risk;
        let scale = problem.scale().max(1.0);
        assert!(
            (brute - exact).abs() <= 1e-10 * scale,
            "round {round}: brute {brute} vs exact {exact}"
        );
        assert!(
            (brute - grid).abs() <= 1e-3 * scale,
            "round {round}: brute {brute} vs grid {grid}"
        );
    }
}

#[test]
fn funded_seller_has_zero_risk_above_the_price() {
    let mut rng = common::rng(0x5f01_0002);
    for round in 0..15 {
        let steps = rng.random_range(1..=4);
        let inst = random_instance(&mut rng, steps);
        let v = game_option::price(&inst).unwrap().value;
        let problem = ShortfallProblem::from_instance(&inst, v.min(1.9), &coarse()).unwrap();
        let report = shortfall_dp(&problem, DpBackend::Exact).unwrap();
        // at exactly x = V the zero kink sits within rounding of the
        // capital; beyond it the curve is exactly zero
        assert!(
            report.risk <= 1e-12 * problem.scale(),
            "round {round}: R({v}) = {}",
            report.risk
        );
        let margin = 1e-9 * problem.scale();
        for (w, r) in &report.root_curve {
            if *w >= v + margin {
                assert_eq!(*r, 0.0, "round {round}: R({w}) = {r}");
            } else if *w >= v {
                assert!(*r <= 1e-12 * problem.scale());
            }
        }
    }
}

#[test]
fn risk_decreases_in_capital_and_respects_bounds() {
    let mut rng = common::rng(0x5f01_0003);
    for _ in 0..10 {
        let steps = rng.random_range(1..=4);
        let inst = random_instance(&mut rng, steps);
        let problem = ShortfallProblem::from_instance(&inst, 0.0, &coarse()).unwrap();
        let max_pay = problem.scale();
        for backend in [DpBackend::Exact, DpBackend::Grid] {
            let report = shortfall_dp(&problem, backend).unwrap();
            let mut prev = f64::INFINITY;
            for (_, r) in &report.root_curve {
                assert!(*r >= -1e-15 && *r <= max_pay + 1e-12);
                assert!(*r <= prev + 1e-12, "risk increased along the wealth grid");
                prev = *r;
            }
        }
    }
}

#[test]
fn zero_capital_risk_is_bounded_by_the_largest_payoff() {
    let mut rng = common::rng(0x5f01_0004);
    let inst = random_instance(&mut rng, 3);
    let problem = ShortfallProblem::from_instance(&inst, 0.0, &coarse()).unwrap();
    let r = shortfall_dp(&problem, DpBackend::Exact).unwrap().risk;
    assert!(r >= 0.0);
    assert!(r <= problem.scale());
}
