use hctree::coupling_star::{
    block_bound, coupling_estimate, fit_constant, maximal_coupling_run, regime_bound, round_length,
    star_exact_mixing, star_exact_relaxation, Regime, StarParams,
};
use hctree::model::Configuration;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn shared_uniform_update_is_heat_bath() {
    let sp = StarParams::new(2.0, vec![0.3, 0.8, 0.5]).unwrap();
    let dynamics = sp.dynamics();
    let grid = 100_000;
    for config in [sp.leaves_start(), sp.root_start(), Configuration::zeros(4)] {
        for v in 0..4 {
            let occupied = (0..grid)
                .filter(|k| {
                    let mut c = config.clone();
                    dynamics.update_with(&mut c, v, (*k as f64 + 0.5) / grid as f64);
                    c.get(v)
                })
                .count();
            let want = dynamics.update_prob(&config, v);
            assert!((occupied as f64 / grid as f64 - want).abs() <= 1.0 / grid as f64);
        }
    }
}

#[test]
fn coupling_time_dominates_exact_distance() {
    // TV(P^t(x, .), P^t(y, .)) <= P(T > t) for any coupling.
    for (b, lambda, rho) in [(3, 1.0, 0.5), (4, 4.0, 0.2), (2, 0.5, 0.9)] {
        let sp = StarParams::uniform(b, lambda, rho).unwrap();
        let chain = sp.chain().unwrap();
        let est = coupling_estimate(&sp, 4000, 40, 17).unwrap();
        let (ix, iy) = (chain.index_of(&sp.leaves_start()), chain.index_of(&sp.root_start()));
        let mut dx = vec![0.0; chain.len()];
        let mut dy = vec![0.0; chain.len()];
        dx[ix.unwrap()] = 1.0;
        dy[iy.unwrap()] = 1.0;
        let mut scratch = vec![0.0; chain.len()];
        for _ in 0..est.tmix {
            chain.left_mul(&dx, &mut scratch);
            std::mem::swap(&mut dx, &mut scratch);
            chain.left_mul(&dy, &mut scratch);
            std::mem::swap(&mut dy, &mut scratch);
        }
        let tv = 0.5 * dx.iter().zip(&dy).map(|(a, c)| (a - c).abs()).sum::<f64>();
        let tail = 1.0 - hctree::coupling_star::tmix_quantile();
        assert!(tv <= tail + 0.03, "b={b}: TV {tv} at t={}", est.tmix);
        assert!(est.leaf_dominance);
        let exact = star_exact_mixing(&sp, tail, 1_000_000).unwrap();
        let t_rel = star_exact_relaxation(&sp).unwrap();
        assert!(t_rel <= exact as f64 + 1.0);
    }
}

#[test]
fn runs_are_reproducible_and_stop_after_coalescing() {
    let sp = StarParams::uniform(5, 1.0, 0.4).unwrap();
    let a = coupling_estimate(&sp, 64, 10, 3).unwrap();
    let b = coupling_estimate(&sp, 64, 10, 3).unwrap();
    assert_eq!(a, b);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = sp.leaves_start();
    let trace = maximal_coupling_run(&sp, &x, &x, 3, &mut rng).unwrap();
    assert_eq!(trace.coalescence_step, Some(0));
    assert!(trace.coalesced_by_round.iter().all(|&c| c));
    let mut bad = Configuration::zeros(6);
    bad.set(0, true);
    bad.set(1, true);
    assert!(maximal_coupling_run(&sp, &bad, &x, 1, &mut rng).is_err());
}

#[test]
fn regimes_and_bounds() {
    assert_eq!(round_length(1), 1);
    assert_eq!(round_length(2), 28);
    let small = StarParams::uniform(10, 1.0, 0.05).unwrap();
    assert_eq!(regime_bound(&small).unwrap().regime, Regime::SmallSum);
    let large = StarParams::uniform(10, 1.0, 0.5).unwrap();
    let rb = regime_bound(&large).unwrap();
    assert_eq!(rb.regime, Regime::LargeSum);
    assert!((rb.bound - 2.0 * 10.0 * 10f64.ln()).abs() < 1e-9);
    let mut rho = vec![0.0; 10];
    rho[3] = 0.99;
    assert_eq!(regime_bound(&StarParams::new(1.0, rho).unwrap()).unwrap().regime, Regime::NearOne);
    assert!(regime_bound(&StarParams::uniform(2, 1.0, 0.5).unwrap()).is_err());
    assert_eq!(fit_constant(&[(2.0, 1.0), (1.0, 3.0), (0.0, 9.0)]), Some(3.0));
    assert_eq!(fit_constant(&[]), None);
    let bb = block_bound(3, 4, 2.0).unwrap();
    assert!((bb.bound - 16.0).abs() < 1e-12);
    assert!((bb.exponent - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
    assert!(block_bound(3, 4, 0.5).is_err());
}

#[test]
fn wide_stars_report_capacity() {
    let sp = StarParams::uniform(25, 1.0, 0.5).unwrap();
    assert!(matches!(sp.chain(), Err(hctree::Error::Capacity { .. })));
}
