use hctree::asymptotics::{
    b0, exact_a_pow_n, ln_approx_a_pow_n, ln_exact_a_pow_n, log_sum_exp, SpineChainParams,
};
use hctree_validation::spine_paths;
use proptest::prelude::*;

proptest! {
    #[test]
    fn closed_sum_equals_path_enumeration(p in 0.0f64..=1.0, a in 0.05f64..4.0, h in 1usize..=16, d in 0.0f64..0.2) {
        let sp = SpineChainParams::new(p, 1.0 - p, a, d).unwrap();
        let (pe, qe) = sp.effective_rates();
        let brute = spine_paths(h, pe, qe, a);
        let exact = exact_a_pow_n(h, &sp).unwrap();
        prop_assert!((exact - brute).abs() <= 1e-12 * brute.max(1e-300));
    }

    #[test]
    fn log_sum_exp_is_shift_invariant(xs in proptest::collection::vec(-50.0f64..50.0, 1..20), c in -500.0f64..500.0) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        prop_assert!((log_sum_exp(&xs) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        prop_assert!((log_sum_exp(&shifted) - c - direct).abs() < 1e-9 * direct.abs().max(1.0));
    }
}

#[test]
fn closed_form_approaches_exact() {
    for (p, a) in [(0.3, 1.0), (0.6, 2.5), (0.9, 0.4)] {
        let sp = SpineChainParams::homogeneous(p, a).unwrap();
        let gap = |h| (ln_approx_a_pow_n(h, &sp).unwrap() - ln_exact_a_pow_n(h, &sp).unwrap()).abs();
        assert!(gap(400) <= gap(4).max(1e-11));
        assert!(gap(2000) < 1e-9);
    }
}

#[test]
fn large_heights_stay_finite() {
    let sp = SpineChainParams::homogeneous(0.5, 3.0).unwrap();
    let l = ln_exact_a_pow_n(100_000, &sp).unwrap();
    assert!(l.is_finite() && l > 0.0);
    assert!(exact_a_pow_n(0, &sp).is_err());
}

#[test]
fn threshold_decreases_with_delta() {
    let mut prev = u64::MAX;
    for d in [0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 8.0] {
        let v = b0(d).unwrap();
        assert!(v <= prev, "b0({d}) = {v} > {prev}");
        prev = v;
    }
}
