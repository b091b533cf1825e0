use hctree::exact_gibbs::{
    broadcast_probability, broadcast_sample, check_broadcast_equivalence, enumerate_states, subtree_marginals,
    StreamingRootDp, WeightScheme,
};
use hctree::model::{BitPattern, BoundaryCondition, ModelParams, TreeShape};
use hctree_validation::{brute_force_states, gibbs_probs, marginals};
use proptest::prelude::*;

fn boundary_from_seed(shape: &TreeShape, seed: u64, free: bool) -> BoundaryCondition {
    if free {
        return BoundaryCondition::free(shape);
    }
    let mut bits = BitPattern::zeros(shape.num_leaves());
    for i in 0..shape.num_leaves() {
        bits.set(i, seed.rotate_left(i as u32 * 7) & 3 == 0);
    }
    BoundaryCondition::explicit(shape, bits).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_bitmask_gibbs(
        b in 1usize..=4, h in 0usize..=3, lin in 0.05f64..5.0, lleaf in 0.05f64..5.0,
        seed in any::<u64>(), free in any::<bool>(),
    ) {
        let shape = TreeShape::new(b, h).unwrap();
        prop_assume!(shape.n() <= 21);
        let boundary = boundary_from_seed(&shape, seed, free);
        let scheme = WeightScheme { internal_activity: lin, leaf_activity: lleaf };
        let table = subtree_marginals(&shape, &boundary, &scheme).unwrap();
        let states = brute_force_states(&shape, &boundary);
        let activity = |v: usize| {
            if boundary.fixed(&shape, v).is_some() { 1.0 } else { scheme.activity(&shape, v) }
        };
        let probs = gibbs_probs(&states, activity);
        let m = marginals(&states, &probs, shape.n());
        for v in 0..shape.n() {
            prop_assert!((table.p_occ[v] - m[v]).abs() < 1e-12, "vertex {} {} vs {}", v, table.p_occ[v], m[v]);
        }
        let dist = enumerate_states(&shape, &boundary, &scheme).unwrap();
        prop_assert_eq!(dist.len(), states.len());
        let em = dist.marginals(shape.n());
        for v in 0..shape.n() {
            prop_assert!((em[v] - m[v]).abs() < 1e-12);
        }
    }

    #[test]
    fn streaming_matches_full_recursion(b in 2usize..=4, h in 1usize..=5, lambda in 0.1f64..20.0, seed in any::<u64>()) {
        let shape = TreeShape::new(b, h).unwrap();
        prop_assume!(shape.num_leaves() <= 1024);
        let boundary = boundary_from_seed(&shape, seed, false);
        let scheme = WeightScheme::uniform(lambda);
        let table = subtree_marginals(&shape, &boundary, &scheme).unwrap();
        let leaves = boundary.leaf_bits().unwrap().to_bools();

        let mut by_leaf = StreamingRootDp::new(b, h, scheme);
        by_leaf.push_leaves(&leaves);
        let (ratio, log_z) = by_leaf.finish().unwrap();

        let mut by_block = StreamingRootDp::new(b, h, scheme);
        for chunk in leaves.chunks(b) {
            by_block.push_block(chunk);
        }
        let (ratio_b, log_z_b) = by_block.finish().unwrap();

        let mut ratio_only = StreamingRootDp::ratio_only(b, h, scheme);
        for chunk in leaves.chunks(b) {
            ratio_only.push_block(chunk);
        }
        let (ratio_o, log_z_o) = ratio_only.finish().unwrap();

        let tol = 1e-12 * table.ratio[0].max(1.0);
        prop_assert!((ratio - table.ratio[0]).abs() <= tol);
        prop_assert!((ratio_b - table.ratio[0]).abs() <= tol);
        prop_assert!((ratio_o - table.ratio[0]).abs() <= tol);
        prop_assert!((log_z - table.log_z).abs() <= 1e-10 * table.log_z.abs().max(1.0));
        prop_assert!((log_z_b - table.log_z).abs() <= 1e-10 * table.log_z.abs().max(1.0));
        prop_assert!(log_z_o.is_nan());
    }
}

#[test]
fn partition_function_matches_direct_sum() {
    let shape = TreeShape::new(2, 3).unwrap();
    let free = BoundaryCondition::free(&shape);
    let lambda = 1.7f64;
    let z: f64 = brute_force_states(&shape, &free).iter().map(|s| lambda.powi(s.count_ones() as i32)).sum();
    let table = subtree_marginals(&shape, &free, &WeightScheme::uniform(lambda)).unwrap();
    assert!((table.log_z - z.ln()).abs() < 1e-12);
}

#[test]
fn incomplete_stream_is_an_error() {
    let mut dp = StreamingRootDp::new(2, 2, WeightScheme::uniform(1.0));
    dp.push_leaves(&[false, true, false]);
    assert!(dp.finish().is_err());
}

#[test]
fn broadcast_weights_give_broadcast_law() {
    for (b, h) in [(2, 3), (3, 2), (5, 1)] {
        let shape = TreeShape::new(b, h).unwrap();
        for omega in [0.05, 0.7, 3.0] {
            let params = ModelParams::from_omega(omega, b as u64).unwrap();
            assert!(check_broadcast_equivalence(&shape, &params).unwrap() < 1e-12);
        }
    }
}

#[test]
fn sampler_frequencies_follow_the_broadcast_law() {
    let shape = TreeShape::new(2, 1).unwrap();
    let omega = 0.8;
    let draws = 40_000;
    let mut counts = std::collections::HashMap::new();
    for seed in 0..draws {
        *counts.entry(broadcast_sample(&shape, omega, seed)).or_insert(0usize) += 1;
    }
    for (config, c) in counts {
        let p = broadcast_probability(&config, &shape, omega);
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((c as f64 / draws as f64 - p).abs() < 5.0 * se, "{config:?}");
    }
}
