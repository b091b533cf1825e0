use hctree::model::{BitPattern, BoundaryCondition, TreeShape};
use hctree::reconstruction::{
    bw_label, exact_broadcast_sensitivity, exact_joint_stats, flip_count, ghat_series, output_at_level,
    sensitivity_sample,
};
use hctree_validation::{brute_force_states, gibbs_probs};
use proptest::prelude::*;

/// Root label by direct recursion over the leaf spins.
fn naive_output(leaves: &[bool], b: usize, h: usize) -> bool {
    if h == 0 {
        return leaves[0];
    }
    let width = leaves.len() / b;
    !(0..b).any(|j| naive_output(&leaves[j * width..(j + 1) * width], b, h - 1))
}

proptest! {
    #[test]
    fn labeling_and_flip_counts(b in 1usize..=4, h in 0usize..=4, seed in any::<u64>()) {
        let shape = TreeShape::new(b, h).unwrap();
        prop_assume!(shape.num_leaves() <= 64);
        let leaves: Vec<bool> = (0..shape.num_leaves()).map(|i| seed >> i & 1 == 1).collect();
        let labeling = bw_label(&BitPattern::from_bools(&leaves), &shape).unwrap();
        let out = naive_output(&leaves, b, h);
        prop_assert_eq!(labeling.output, out);
        let mut flips = 0;
        for i in 0..leaves.len() {
            let mut l = leaves.clone();
            l[i] = !l[i];
            if naive_output(&l, b, h) != out {
                flips += 1;
            }
        }
        prop_assert_eq!(flip_count(&labeling.labels, &shape), flips);
    }
}

fn broadcast_states(shape: &TreeShape, omega: f64) -> (Vec<hctree::model::Configuration>, Vec<f64>) {
    let free = BoundaryCondition::free(shape);
    let states = brute_force_states(shape, &free);
    let lambda = omega * (1.0 + omega).powi(shape.b() as i32);
    let probs = gibbs_probs(&states, |v| if shape.is_leaf(v) { omega } else { lambda });
    (states, probs)
}

#[test]
fn joint_law_and_ghat_match_enumeration() {
    for (b, h) in [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (4, 1)] {
        let shape = TreeShape::new(b, h).unwrap();
        for omega in [0.15, 0.6, 2.0] {
            let (states, probs) = broadcast_states(&shape, omega);
            let mut p = [[0.0; 2]; 2];
            for (s, w) in states.iter().zip(&probs) {
                p[s.get(0) as usize][output_at_level(s, &shape, 0) as usize] += w;
            }
            let joint = exact_joint_stats(b as u64, h, omega);
            for x in 0..2 {
                for y in 0..2 {
                    assert!((joint.p[x][y] - p[x][y]).abs() < 1e-12, "b={b} h={h} omega={omega}");
                }
            }
            let g = ghat_series(h + 1, b as u64, omega).unwrap();
            assert!((g.get(h + 1) - (p[0][0] + p[1][0])).abs() < 1e-12);
            assert_eq!(g.at_height(h), g.get(h + 1));
        }
    }
}

#[test]
fn ghat_starts_from_the_root_law() {
    let g = ghat_series(3, 3, 0.5).unwrap();
    assert!((g.get(1) - 1.0 / 1.5).abs() < 1e-15);
    assert!(ghat_series(0, 3, 0.5).is_err());
}

#[test]
fn sampled_sensitivity_brackets_the_exact_value() {
    for (b, h, omega) in [(2, 3, 0.5), (3, 2, 1.2)] {
        let shape = TreeShape::new(b, h).unwrap();
        for indicator in [true, false] {
            let exact = exact_broadcast_sensitivity(&shape, omega, indicator).unwrap();
            let est = sensitivity_sample(&shape, omega, 20_000, 11, indicator).unwrap();
            assert!(
                (est.mean - exact).abs() <= 4.0 * est.stderr + 1e-12,
                "b={b} h={h}: {} +- {} vs {exact}",
                est.mean,
                est.stderr
            );
        }
    }
}

#[test]
fn sampling_is_reproducible() {
    let shape = TreeShape::new(3, 3).unwrap();
    let a = sensitivity_sample(&shape, 0.4, 3000, 5, true).unwrap();
    let b = sensitivity_sample(&shape, 0.4, 3000, 5, true).unwrap();
    assert_eq!(a, b);
}
