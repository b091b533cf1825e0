//! Heat-bath dynamics on a star whose root has activity `lambda` and whose
//! leaf `i` is occupied with probability `rho_i` when the root is empty.
//! Exact relaxation times, the maximal one-step coupling, regime
//! classification of `rho`, and the block-dynamics bound `tau^h`.
//!
//! All times are in single-site steps with the vertex drawn uniformly from
//! the `b + 1` star vertices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::glauber::{mixing_time_exact, spectral_report, ChainMatrix, HeatBath, SpectralReport};
use crate::model::{BoundaryCondition, Configuration, TreeShape};

/// Largest leaf count for exact star computations.
pub const STAR_EXACT_MAX_B: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct StarParams {
    pub b: usize,
    pub lambda: f64,
    pub rho: Vec<f64>,
}

impl StarParams {
    pub fn new(lambda: f64, rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::Domain("a star needs at least one leaf".into()));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("root activity must be positive, got {lambda}")));
        }
        if let Some(r) = rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Domain(format!("leaf probability {r} outside [0, 1]")));
        }
        Ok(Self { b: rho.len(), lambda, rho })
    }

    pub fn uniform(b: usize, lambda: f64, rho: f64) -> Result<Self> {
        Self::new(lambda, vec![rho; b])
    }

    pub fn shape(&self) -> TreeShape {
        TreeShape::new(self.b, 1).expect("height-1 star always fits")
    }

    pub fn sum_rho(&self) -> f64 {
        self.rho.iter().sum()
    }

    /// Heat-bath rule: root at `lambda/(1+lambda)`, leaf `i` at `rho_i`.
    pub fn dynamics(&self) -> HeatBath {
        let shape = self.shape();
        let mut probs = Vec::with_capacity(self.b + 1);
        probs.push(self.lambda / (1.0 + self.lambda));
        probs.extend_from_slice(&self.rho);
        HeatBath::new(&shape, &BoundaryCondition::free(&shape), probs)
            .expect("probabilities validated by StarParams")
    }

    /// Root empty, every leaf occupied.
    pub fn leaves_start(&self) -> Configuration {
        let mut c = Configuration::zeros(self.b + 1);
        for v in 1..=self.b {
            c.set(v, true);
        }
        c
    }

    /// Root occupied, every leaf empty.
    pub fn root_start(&self) -> Configuration {
        let mut c = Configuration::zeros(self.b + 1);
        c.set(0, true);
        c
    }

    fn check_exact(&self) -> Result<()> {
        if self.b > STAR_EXACT_MAX_B {
            return Err(Error::Capacity {
                estimated: 2f64.powi(self.b as i32) + 1.0,
                limit: 2f64.powi(STAR_EXACT_MAX_B as i32) + 1.0,
            });
        }
        Ok(())
    }

    /// Transition matrix on the stationary support.
    pub fn chain(&self) -> Result<ChainMatrix> {
        self.check_exact()?;
        let shape = self.shape();
        ChainMatrix::heat_bath(&self.dynamics(), &BoundaryCondition::free(&shape), f64::INFINITY)
    }
}

/// Spectral report of the star chain.
pub fn star_spectral(sp: &StarParams) -> Result<SpectralReport> {
    spectral_report(&sp.chain()?)
}

/// Relaxation time of the star chain in single-site steps.
pub fn star_exact_relaxation(sp: &StarParams) -> Result<f64> {
    Ok(star_spectral(sp)?.t_rel)
}

/// Exact mixing time `max_x TV <= eps` over the two extreme starts that lie
/// in the stationary support (all starts when neither does).
pub fn star_exact_mixing(sp: &StarParams, eps: f64, max_steps: u64) -> Result<u64> {
    let chain = sp.chain()?;
    let starts: Vec<usize> = [sp.leaves_start(), sp.root_start()]
        .iter()
        .filter_map(|c| chain.index_of(c))
        .collect();
    let starts = if starts.is_empty() { (0..chain.len()).collect() } else { starts };
    Ok(mixing_time_exact(&chain, &starts, eps, max_steps)?.steps)
}

/// One coupled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTrace {
    pub round_length: u64,
    /// `coalesced_by_round[k]`: the chains agree at the end of round `k + 1`.
    pub coalesced_by_round: Vec<bool>,
    /// First step at which the chains agree.
    pub coalescence_step: Option<u64>,
    /// Whether the leaf count of `X` stayed at least that of `Y` throughout.
    pub leaf_dominance: bool,
}

/// `max(1, ceil(20 b ln b))`.
pub fn round_length(b: usize) -> u64 {
    let bf = b as f64;
    ((20.0 * bf * bf.ln()).ceil() as u64).max(1)
}

fn leaf_count(c: &Configuration) -> usize {
    c.count_ones() - usize::from(c.get(0))
}

/// Runs the coupled chains for `rounds` rounds of `round_length(b)` steps.
/// Both chains update the same vertex with the same uniform variate, which
/// makes the chosen spins agree with the largest possible probability.
pub fn maximal_coupling_run<R: Rng + ?Sized>(
    sp: &StarParams,
    x0: &Configuration,
    y0: &Configuration,
    rounds: usize,
    rng: &mut R,
) -> Result<CouplingTrace> {
    let shape = sp.shape();
    let free = BoundaryCondition::free(&shape);
    for c in [x0, y0] {
        if !crate::model::validate(c, &shape, &free)? {
            return Err(Error::Structural("start is not an independent set of the star".into()));
        }
    }
    let dynamics = sp.dynamics();
    let t_round = round_length(sp.b);
    let (mut x, mut y) = (x0.clone(), y0.clone());
    let mut coalescence_step = (x == y).then_some(0);
    let mut leaf_dominance = leaf_count(&x) >= leaf_count(&y);
    let mut coalesced_by_round = Vec::with_capacity(rounds);
    let mut step = 0u64;
    for _ in 0..rounds {
        if coalescence_step.is_some() {
            // Identical chains receive identical updates from here on.
            coalesced_by_round.push(true);
            continue;
        }
        for _ in 0..t_round {
            step += 1;
            let v = rng.random_range(0..=sp.b);
            let u = rng.random::<f64>();
            dynamics.update_with(&mut x, v, u);
            dynamics.update_with(&mut y, v, u);
            if leaf_count(&x) < leaf_count(&y) {
                leaf_dominance = false;
            }
            if coalescence_step.is_none() && x == y {
                coalescence_step = Some(step);
            }
        }
        coalesced_by_round.push(x == y);
    }
    Ok(CouplingTrace { round_length: t_round, coalesced_by_round, coalescence_step, leaf_dominance })
}

/// Coupling-time statistics from the leaves-occupied / root-occupied pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StarCouplingEstimate {
    /// `(1 - 1/(2e))` quantile of the coalescence time: an estimate of an
    /// upper bound on `Tmix(1/(2e))`.
    pub tmix: u64,
    /// Fraction of runs coalesced within the first round.
    pub p_round: f64,
    /// Fraction of runs coalesced within the step budget.
    pub coalesced_fraction: f64,
    /// Whether leaf dominance held on every run.
    pub leaf_dominance: bool,
    pub runs: usize,
}

/// Quantile level used for the mixing estimate.
pub fn tmix_quantile() -> f64 {
    1.0 - 1.0 / (2.0 * std::f64::consts::E)
}

pub fn coupling_estimate(
    sp: &StarParams,
    runs: usize,
    rounds: usize,
    seed: u64,
) -> Result<StarCouplingEstimate> {
    if runs == 0 || rounds == 0 {
        return Err(Error::Domain("need at least one run and one round".into()));
    }
    let (x0, y0) = (sp.leaves_start(), sp.root_start());
    let traces: Vec<CouplingTrace> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            maximal_coupling_run(sp, &x0, &y0, rounds, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut times: Vec<u64> = traces.iter().filter_map(|t| t.coalescence_step).collect();
    times.sort_unstable();
    let need = (tmix_quantile() * runs as f64).ceil() as usize;
    if times.len() < need {
        return Err(Error::Budget(format!(
            "only {} of {runs} runs coalesced within {rounds} rounds",
            times.len()
        )));
    }
    let first_round = traces.iter().filter(|t| t.coalesced_by_round[0]).count();
    Ok(StarCouplingEstimate {
        tmix: times[need.max(1) - 1],
        p_round: first_round as f64 / runs as f64,
        coalesced_fraction: times.len() as f64 / runs as f64,
        leaf_dominance: traces.iter().all(|t| t.leaf_dominance),
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `sum rho <= 4 ln ln b`.
    SmallSum,
    /// `sum rho > 4 ln ln b` and no leaf near one.
    LargeSum,
    /// Some `rho_i > 1 - 1/ln b`.
    NearOne,
}

impl Regime {
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::SmallSum => "small_sum",
            Regime::LargeSum => "large_sum",
            Regime::NearOne => "near_one",
        }
    }
}

/// Classification with the bound formula value, before any constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeBound {
    pub regime: Regime,
    /// `b e^{4 ln^2 ln b}` for the small-sum regime, `(lambda + 1) b ln b`
    /// otherwise.
    pub bound: f64,
}

pub fn regime_bound(sp: &StarParams) -> Result<RegimeBound> {
    if sp.b < 3 {
        return Err(Error::Domain(format!("regimes need b >= 3, got {}", sp.b)));
    }
    let bf = sp.b as f64;
    let lnb = bf.ln();
    let lnlnb = lnb.ln();
    let regime = if sp.rho.iter().any(|&r| r > 1.0 - 1.0 / lnb) {
        Regime::NearOne
    } else if sp.sum_rho() <= 4.0 * lnlnb {
        Regime::SmallSum
    } else {
        Regime::LargeSum
    };
    let bound = match regime {
        Regime::SmallSum => bf * (4.0 * lnlnb * lnlnb).exp(),
        _ => (sp.lambda + 1.0) * bf * lnb,
    };
    Ok(RegimeBound { regime, bound })
}

/// Single multiplicative constant making every `(bound, observed)` pair
/// satisfy `observed <= c * bound`. Reported as fitted, not proven.
pub fn fit_constant(pairs: &[(f64, f64)]) -> Option<f64> {
    pairs
        .iter()
        .filter(|(bound, _)| *bound > 0.0)
        .map(|(bound, obs)| obs / bound)
        .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
}

/// Block-dynamics bound `tau^h` and its exponent against `n ~ b^h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockBound {
    pub ln_bound: f64,
    pub bound: f64,
    /// `ln tau / ln b`.
    pub exponent: f64,
}

pub fn block_bound(b: usize, h: usize, tau_star: f64) -> Result<BlockBound> {
    if b < 2 {
        return Err(Error::Domain(format!("block bound needs b >= 2, got {b}")));
    }
    if !(tau_star >= 1.0) {
        return Err(Error::Domain(format!("relaxation time must be >= 1, got {tau_star}")));
    }
    let ln_bound = h as f64 * tau_star.ln();
    Ok(BlockBound { ln_bound, bound: ln_bound.exp(), exponent: tau_star.ln() / (b as f64).ln() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_leaves_reduce_to_root_chain() {
        // With rho = 0 the leaves stay empty and the root flips at rate
        // 1/(b+1); the two-state gap is 1/(b+1).
        for b in 1..=5 {
            let sp = StarParams::uniform(b, 2.0, 0.0).unwrap();
            let t = star_exact_relaxation(&sp).unwrap();
            assert!((t - (b + 1) as f64).abs() < 1e-8, "b={b}: {t}");
        }
    }

    #[test]
    fn coupled_identical_starts() {
        let sp = StarParams::uniform(3, 1.0, 0.5).unwrap();
        let x = sp.leaves_start();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tr = maximal_coupling_run(&sp, &x, &x, 2, &mut rng).unwrap();
        assert_eq!(tr.coalescence_step, Some(0));
        assert!(tr.coalesced_by_round.iter().all(|&c| c));
    }

    #[test]
    fn regimes() {
        let zeros = StarParams::uniform(100, 1.0, 0.0).unwrap();
        assert_eq!(regime_bound(&zeros).unwrap().regime, Regime::SmallSum);
        let ones = StarParams::uniform(100, 1.0, 1.0).unwrap();
        assert_eq!(regime_bound(&ones).unwrap().regime, Regime::NearOne);
        assert!(regime_bound(&StarParams::uniform(2, 1.0, 0.1).unwrap()).is_err());
    }

    #[test]
    fn block_bound_identities() {
        let bb = block_bound(5, 4, 5.0).unwrap();
        assert!((bb.bound - 625.0).abs() < 1e-9);
        assert!((bb.exponent - 1.0).abs() < 1e-15);
        assert_eq!(block_bound(5, 4, 1.0).unwrap().bound, 1.0);
        assert!(block_bound(5, 4, 0.5).is_err());
    }
}
