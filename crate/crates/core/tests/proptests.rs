//! Property-based invariants over randomized inputs.

use proptest::prelude::*;

use gamehedge::dynkin::{solve_dp, DynkinInstance};
use gamehedge::pl::{h_kernel, PiecewiseLinear, PlFn};
use gamehedge::tree::{bs_to_crr, dfs_nodes, dfs_rank, Adapted, CrrParams, EventTree, NodeId};
use gamehedge::txcost::{chi_value, p_to_chi};

proptest! {
    #[test]
    fn node_addressing_bijection(depth in 0usize..10, bits in any::<u64>()) {
        let idx = (bits as usize) & ((1usize << depth) - 1).max(0);
        let node = NodeId { t: depth, idx };
        prop_assert_eq!(NodeId::from_signs(&node.signs()), node);
    }

    #[test]
    fn dfs_rank_inverts_the_enumeration(depth in 0usize..7) {
        for (rank, node) in dfs_nodes(depth).into_iter().enumerate() {
            prop_assert_eq!(dfs_rank(node, depth), rank);
        }
    }

    #[test]
    fn martingale_identity_holds_everywhere(
        s0 in 0.1f64..500.0,
        up in 0.01f64..0.8,
        down_frac in 0.05f64..0.95,
        rate_frac in 0.05f64..0.95,
        steps in 1usize..7,
    ) {
        let down = -0.8 * down_frac;
        let rate = down + (up - down) * rate_frac;
        let params = CrrParams::new(s0, up, down, rate, steps).unwrap();
        let tree = params.event_tree();
        let prices = params.price_process();
        for node in tree.non_terminal_nodes() {
            let here = params.discount(node.t) * prices.get(node);
            let next = params.discount(node.t + 1) * tree.expect_children(&prices, node);
            prop_assert!((here - next).abs() <= 1e-12 * here.abs());
        }
    }

    #[test]
    fn bs_discretization_is_deterministic_and_martingale(
        rate in -0.1f64..0.2,
        vol in 0.01f64..1.5,
        maturity in 0.05f64..5.0,
        steps in 1usize..2000,
    ) {
        let a = bs_to_crr(rate, vol, maturity, steps).unwrap();
        let b = bs_to_crr(rate, vol, maturity, steps).unwrap();
        prop_assert_eq!(a.prob_up.to_bits(), b.prob_up.to_bits());
        prop_assert_eq!(a.step_up.to_bits(), b.step_up.to_bits());
        let e = a.prob_up * (1.0 + a.step_up) + (1.0 - a.prob_up) * (1.0 + a.step_down);
        prop_assert!((e - (1.0 + a.step_rate)).abs() <= 1e-12 * (1.0 + a.step_rate));
    }

    #[test]
    fn dynkin_value_is_sandwiched(
        seed in any::<u64>(),
        depth in 1usize..5,
    ) {
        use rand::Rng as _;
        use rand_chacha::rand_core::SeedableRng as _;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let tree = EventTree::homogeneous(depth, rng.random_range(0.1..0.9)).unwrap();
        let lower = Adapted::from_fn(depth, |_| rng.random_range(-1.0..1.0));
        let upper = lower.map(|node, y| {
            if node.t == depth { *y } else { y + rng.random_range(0.0..1.0) }
        });
        let inst = DynkinInstance::with_diagonal_lower(tree, upper, lower).unwrap();
        let values = solve_dp(&inst).unwrap();
        for node in values.values.nodes() {
            prop_assert!(*values.values.get(node) >= *inst.lower.get(node) - 1e-12);
            prop_assert!(*values.values.get(node) <= *inst.upper.get(node) + 1e-12);
        }
    }

    #[test]
    fn kernel_is_positively_homogeneous_and_subadditive(
        d in -2.0f64..2.0,
        extra in 0.0f64..3.0,
        y1 in -10.0f64..10.0,
        y2 in -10.0f64..10.0,
        lambda in 0.0f64..5.0,
    ) {
        let c = d + extra;
        let h = h_kernel(d, c).unwrap();
        let tol = 1e-9 * (1.0 + y1.abs() + y2.abs()) * (1.0 + c.abs());
        prop_assert!((h.eval(lambda * y1) - lambda * h.eval(y1)).abs() <= tol * (1.0 + lambda));
        prop_assert!(h.eval(y1 + y2) <= h.eval(y1) + h.eval(y2) + tol);
    }

    #[test]
    fn canonical_eval_agreement(
        xs_raw in proptest::collection::vec(-10.0f64..10.0, 1..6),
        vs_seed in proptest::collection::vec(-5.0f64..5.0, 6),
        sl in -3.0f64..3.0,
        sr in -3.0f64..3.0,
        probe in -20.0f64..20.0,
    ) {
        let mut xs = xs_raw;
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let vs: Vec<f64> = vs_seed.into_iter().take(xs.len()).collect();
        let f = PlFn::new(xs, vs, sl, sr).unwrap();
        let canon = f.canonicalize();
        let (a, b) = (f.eval(probe), canon.eval(probe));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let g = PiecewiseLinear::Finite(f);
        prop_assert!((g.eval(probe) - b).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn randomized_stop_weights_are_a_distribution(
        seed in any::<u64>(),
        depth in 1usize..5,
    ) {
        use rand::Rng as _;
        use rand_chacha::rand_core::SeedableRng as _;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = Adapted::from_fn(depth, |node| {
            if node.t == depth { 1.0 } else { rng.random_range(0.0..1.0) }
        });
        let chi = p_to_chi(&p).unwrap();
        // chi_value of a constant is the constant; of a bounded process it
        // stays inside the bounds
        let z = Adapted::from_fn(depth, |node| (node.t * 2 + node.idx) as f64);
        let zmax = z.max_abs();
        for v in chi_value(&z, &chi) {
            prop_assert!(v >= -1e-12 && v <= zmax + 1e-12);
        }
        let c = Adapted::constant(depth, 3.25);
        for v in chi_value(&c, &chi) {
            prop_assert!((v - 3.25).abs() <= 1e-12);
        }
    }
}
