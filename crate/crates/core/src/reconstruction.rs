//! The bottom-up labeling reconstruction algorithm: labels, exact joint law
//! of (root spin, output), sensitivity, the `ghat` recurrences, and the
//! conductance of the cut defined by the algorithm's output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact_gibbs::{broadcast_sample_with, enumerate_states, StateDistribution, WeightScheme};
use crate::glauber::{build_matrix, conductance, ChainMatrix};
use crate::model::{BitPattern, BoundaryCondition, Configuration, TreeShape};

/// Labels `R(v)` of every vertex and the output `R(root)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BwLabeling {
    pub labels: BitPattern,
    pub output: bool,
}

/// Labels from leaf spins: a leaf keeps its spin, an internal vertex is
/// labeled 1 exactly when all of its children are labeled 0.
pub fn bw_label(leaf_config: &BitPattern, shape: &TreeShape) -> Result<BwLabeling> {
    if leaf_config.len() != shape.num_leaves() {
        return Err(Error::Structural(format!(
            "{} leaf spins for {} leaves",
            leaf_config.len(),
            shape.num_leaves()
        )));
    }
    let mut labels = BitPattern::zeros(shape.n());
    let first = shape.first_leaf();
    for v in (0..shape.n()).rev() {
        let label = if shape.is_leaf(v) {
            leaf_config.get(v - first)
        } else {
            !shape.children(v).any(|w| labels.get(w))
        };
        labels.set(v, label);
    }
    let output = labels.get(0);
    Ok(BwLabeling { labels, output })
}

/// Output of the labeling when the spins at distance `ell` from the leaves
/// are used as inputs.
pub fn bw_label_at_height(config_at_level: &BitPattern, shape: &TreeShape, ell: usize) -> Result<bool> {
    if ell >= shape.h() && !(ell == 0 && shape.h() == 0) {
        return Err(Error::Domain(format!("ell={ell} must be below the height {}", shape.h())));
    }
    let inner = TreeShape::new(shape.b(), shape.h() - ell)?;
    Ok(bw_label(config_at_level, &inner)?.output)
}

/// Output of the labeling applied to a full configuration, reading the
/// vertices at depth `h - ell`.
pub fn output_at_level(config: &Configuration, shape: &TreeShape, ell: usize) -> bool {
    let depth = shape.h() - ell;
    let level = shape.level(depth);
    label_of(config, shape, 0, &level)
}

fn label_of(config: &Configuration, shape: &TreeShape, v: usize, level: &std::ops::Range<usize>) -> bool {
    if level.contains(&v) {
        return config.get(v);
    }
    !shape.children(v).any(|w| label_of(config, shape, w, level))
}

/// Joint law `p[x][y] = P(spin(root) = x, output = y)` and the effectiveness
/// `r_eff = min_x (p[x][x] - P(spin = x) P(output = x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointRootStats {
    pub p: [[f64; 2]; 2],
    pub r_eff: f64,
}

impl JointRootStats {
    pub fn from_joint(p: [[f64; 2]; 2]) -> Self {
        let row = [p[0][0] + p[0][1], p[1][0] + p[1][1]];
        let col = [p[0][0] + p[1][0], p[0][1] + p[1][1]];
        let r_eff = (0..2).map(|x| p[x][x] - row[x] * col[x]).fold(f64::INFINITY, f64::min);
        Self { p, r_eff }
    }

    pub fn p_output_zero(&self) -> f64 {
        self.p[0][0] + self.p[1][0]
    }
}

/// Exact joint law of (root spin, output) under the broadcast process on a
/// height-`h` tree, by a four-state recursion over heights.
pub fn exact_joint_stats(b: u64, h: usize, omega: f64) -> JointRootStats {
    let q = crate::exact_gibbs::broadcast_occupation(omega);
    let bf = b as f64;
    let mut j = [[1.0 - q, 0.0], [0.0, q]];
    for _ in 0..h {
        let g = j[0][0] + j[1][0];
        let gb = g.powf(bf);
        // P(label 0 | spin 0) one level down.
        let c = if q < 1.0 { j[0][0] / (1.0 - q) } else { 1.0 };
        let cb = c.powf(bf);
        j = [[(1.0 - q) * (1.0 - gb), (1.0 - q) * gb], [q * (1.0 - cb), q * cb]];
    }
    JointRootStats::from_joint(j)
}

/// Joint law of (root spin, output at distance `ell`) from an enumerated
/// distribution.
pub fn joint_stats_from_distribution(
    dist: &StateDistribution,
    shape: &TreeShape,
    ell: usize,
) -> JointRootStats {
    let mut p = [[0.0; 2]; 2];
    for (s, &w) in dist.states.iter().zip(&dist.probs) {
        let x = s.get(0) as usize;
        let y = output_at_level(s, shape, ell) as usize;
        p[x][y] += w;
    }
    JointRootStats::from_joint(p)
}

/// `ghat_i` for `i = 1..=h`: the probability that the algorithm outputs 0 on
/// a broadcast tree whose height is `i - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GhatSeries {
    values: Vec<f64>,
}

impl GhatSeries {
    /// `ghat_i`, `1 <= i <= len`.
    pub fn get(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    /// Probability the output is 0 on a tree of height `k`.
    pub fn at_height(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `ghat_{i+1} = q (1 - (1 - ghat_{i-1}^b)^b) + (1-q)(1 - ghat_i^b)` with
/// `ghat_0 = 0`, `ghat_1 = 1/(1+omega)`.
pub fn ghat_series(h: usize, b: u64, omega: f64) -> Result<GhatSeries> {
    if h == 0 {
        return Err(Error::Domain("ghat series needs h >= 1".into()));
    }
    let q = crate::exact_gibbs::broadcast_occupation(omega);
    let bf = b as f64;
    let mut values = Vec::with_capacity(h);
    let (mut prev, mut cur) = (0.0f64, 1.0 - q);
    values.push(cur);
    for _ in 1..h {
        let next = q * (1.0 - (1.0 - prev.powf(bf)).powf(bf)) + (1.0 - q) * (1.0 - cur.powf(bf));
        values.push(next);
        prev = cur;
        cur = next;
    }
    Ok(GhatSeries { values })
}

/// Outcome of comparing `ghat_i` with `1.01^(1/b) / (1+omega)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhatBoundCheck {
    pub holds: bool,
    /// Smallest `bound - ghat_i` over the checked range.
    pub worst_margin: f64,
    pub first_violation: Option<usize>,
}

pub fn ghat_bound_check(b: u64, delta: f64, h_max: usize) -> Result<GhatBoundCheck> {
    let omega = crate::model::omega_for_delta(delta, b)?;
    let series = ghat_series(h_max, b, omega)?;
    let bound = 1.01f64.powf(1.0 / b as f64) / (1.0 + omega);
    let mut worst = f64::INFINITY;
    let mut first = None;
    for i in 1..=h_max {
        let margin = bound - series.get(i);
        worst = worst.min(margin);
        if margin < 0.0 && first.is_none() {
            first = Some(i);
        }
    }
    Ok(GhatBoundCheck { holds: first.is_none(), worst_margin: worst, first_violation: first })
}

/// `E[a^{#{i > 0 : spine vertex i unoccupied}}]` along a root-to-leaf path of
/// a broadcast tree started from an unoccupied state, with
/// `a = 1.01 omega (1+omega) / lambda`.
pub fn path_sensitivity_bound(h: usize, b: u64, omega: f64) -> f64 {
    let lambda = crate::model::lambda_from_omega(omega, b as f64);
    let a = 1.01 * omega * (1.0 + omega) / lambda;
    let p = 1.0 / (1.0 + omega);
    spine_expectation(h, p, 1.0 - p, a)
}

/// Two-state vector iteration for `E[a^{N_h}]` from state 0.
pub fn spine_expectation(h: usize, p: f64, q: f64, a: f64) -> f64 {
    let (mut v0, mut v1) = (1.0f64, 0.0f64);
    for _ in 0..h {
        let n0 = (v0 * p + v1) * a;
        let n1 = v0 * q;
        v0 = n0;
        v1 = n1;
    }
    v0 + v1
}

/// Sensitivity estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Number of input vertices whose flip changes the output, given the labels
/// of `config`. Flips are evaluated incrementally along the path to the root.
pub fn flip_count(labels: &BitPattern, shape: &TreeShape) -> usize {
    let n = shape.n();
    // Number of children labeled 1, per internal vertex.
    let mut ones = vec![0u32; shape.first_leaf()];
    for v in 1..n {
        if labels.get(v) {
            ones[(v - 1) / shape.b()] += 1;
        }
    }
    let mut count = 0;
    for leaf in shape.leaves() {
        if flip_changes_output(labels, &ones, shape, leaf) {
            count += 1;
        }
    }
    count
}

fn flip_changes_output(labels: &BitPattern, ones: &[u32], shape: &TreeShape, leaf: usize) -> bool {
    let mut v = leaf;
    let mut new_label = !labels.get(v);
    while let Some(p) = shape.parent(v) {
        let old = labels.get(v);
        let count = if new_label && !old {
            ones[p] + 1
        } else if !new_label && old {
            ones[p] - 1
        } else {
            ones[p]
        };
        let parent_new = count == 0;
        if parent_new == labels.get(p) {
            return false;
        }
        new_label = parent_new;
        v = p;
    }
    true
}

/// Monte Carlo estimate of the average sensitivity
/// `E[(1/n) #{leaves whose flip changes A} * 1[A = 1]]` under the broadcast
/// process; `indicator = false` drops the `1[A = 1]` factor.
pub fn sensitivity_sample(
    shape: &TreeShape,
    omega: f64,
    samples: usize,
    seed: u64,
    indicator: bool,
) -> Result<SensitivityEstimate> {
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    const CHUNK: usize = 256;
    let chunks = samples.div_ceil(CHUNK);
    let n = shape.n() as f64;
    let parts: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            // Welford accumulation: (count, mean, sum of squared deviations).
            let (mut k, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
            for _ in 0..len {
                let config = broadcast_sample_with(shape, omega, &mut rng);
                let x = sensitivity_of(&config, shape, indicator) / n;
                k += 1.0;
                let d = x - mean;
                mean += d / k;
                m2 += d * (x - mean);
            }
            (k, mean, m2)
        })
        .collect();
    let (k, mean, m2) = parts.into_iter().fold((0.0, 0.0, 0.0), |(ka, ma, sa), (kb, mb, sb)| {
        let k = ka + kb;
        let d = mb - ma;
        (k, ma + d * kb / k, sa + sb + d * d * ka * kb / k)
    });
    let var = if samples > 1 { m2 / (k - 1.0) } else { 0.0 };
    Ok(SensitivityEstimate { mean, stderr: (var / k).sqrt(), samples })
}

/// `#{leaves whose flip changes A}`, zeroed when `indicator` is set and the
/// output is 0.
fn sensitivity_of(config: &Configuration, shape: &TreeShape, indicator: bool) -> f64 {
    let leaves = leaf_bits(config, shape);
    let labeling = bw_label(&leaves, shape).expect("leaf count matches shape");
    if indicator && !labeling.output {
        return 0.0;
    }
    flip_count(&labeling.labels, shape) as f64
}

fn leaf_bits(config: &Configuration, shape: &TreeShape) -> BitPattern {
    let first = shape.first_leaf();
    let mut bits = BitPattern::zeros(shape.num_leaves());
    for v in shape.leaves() {
        if config.get(v) {
            bits.set(v - first, true);
        }
    }
    bits
}

/// Exact average sensitivity under an enumerated distribution, with flips at
/// the input level `h - ell` and normalization `1/norm`.
pub fn exact_sensitivity(
    dist: &StateDistribution,
    shape: &TreeShape,
    ell: usize,
    norm: f64,
    indicator: bool,
) -> f64 {
    let level = shape.level(shape.h() - ell);
    let mut total = 0.0;
    for (s, &w) in dist.states.iter().zip(&dist.probs) {
        let out = output_at_level(s, shape, ell);
        if indicator && !out {
            continue;
        }
        let mut flips = 0;
        let mut t = s.clone();
        for v in level.clone() {
            t.flip(v);
            if output_at_level(&t, shape, ell) != out {
                flips += 1;
            }
            t.flip(v);
        }
        total += w * flips as f64 / norm;
    }
    total
}

/// Exact broadcast average sensitivity by enumeration of the free tree.
pub fn exact_broadcast_sensitivity(shape: &TreeShape, omega: f64, indicator: bool) -> Result<f64> {
    let free = BoundaryCondition::free(shape);
    let dist = enumerate_states(shape, &free, &WeightScheme::broadcast_omega(omega, shape.b()))?;
    Ok(exact_sensitivity(&dist, shape, 0, shape.n() as f64, indicator))
}

/// Conductance of the cut `{A = 1}` together with the quantities that bound
/// it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BwCutReport {
    pub phi_u: f64,
    pub s_bar: f64,
    pub r_eff: f64,
    pub joint: JointRootStats,
    /// `S_bar / r_eff^2`, present when `r_eff > 0`.
    pub bound: Option<f64>,
    pub bound_holds: Option<bool>,
}

/// Exact conductance of `U = {sigma : A_ell(sigma) = 1}` for the heat-bath
/// chain of `scheme`, with the sensitivity normalized by the number of free
/// vertices (the per-vertex selection probability of the chain).
pub fn bw_cut_conductance(
    shape: &TreeShape,
    scheme: &WeightScheme,
    boundary: &BoundaryCondition,
    ell: usize,
) -> Result<BwCutReport> {
    let chain = build_matrix(shape, boundary, scheme)?;
    bw_cut_conductance_on(&chain, shape, ell)
}

pub fn bw_cut_conductance_on(chain: &ChainMatrix, shape: &TreeShape, ell: usize) -> Result<BwCutReport> {
    if ell > shape.h() {
        return Err(Error::Domain(format!("ell={ell} exceeds the height {}", shape.h())));
    }
    let mask: Vec<bool> = chain.states.iter().map(|s| output_at_level(s, shape, ell)).collect();
    let phi_u = conductance(chain, &mask)?;
    let dist = StateDistribution { states: chain.states.clone(), probs: chain.pi.clone() };
    let s_bar = exact_sensitivity(&dist, shape, ell, chain.n_free() as f64, true);
    let joint = joint_stats_from_distribution(&dist, shape, ell);
    let r_eff = joint.r_eff;
    let bound = (r_eff > 0.0).then(|| s_bar / (r_eff * r_eff));
    let bound_holds = bound.map(|bd| phi_u <= bd * (1.0 + 1e-12) + 1e-15);
    Ok(BwCutReport { phi_u, s_bar, r_eff, joint, bound, bound_holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_examples() {
        let s1 = TreeShape::new(2, 1).unwrap();
        assert!(bw_label(&BitPattern::zeros(2), &s1).unwrap().output);
        assert!(!bw_label(&BitPattern::from_ones(2, &[1]), &s1).unwrap().output);
        let s2 = TreeShape::new(2, 2).unwrap();
        let l = bw_label(&BitPattern::zeros(4), &s2).unwrap();
        assert!(l.labels.get(1) && l.labels.get(2));
        assert!(!l.output);
        assert!(bw_label(&BitPattern::zeros(3), &s2).is_err());
    }

    #[test]
    fn label_at_height_examples() {
        let s2 = TreeShape::new(2, 2).unwrap();
        assert!(bw_label_at_height(&BitPattern::zeros(2), &s2, 1).unwrap());
        let s3 = TreeShape::new(2, 3).unwrap();
        assert!(!bw_label_at_height(&BitPattern::from_ones(4, &[1]), &s3, 1).unwrap());
        assert!(matches!(bw_label_at_height(&BitPattern::zeros(1), &s2, 2), Err(Error::Domain(_))));
        let leaves = BitPattern::from_ones(8, &[3, 6]);
        assert_eq!(
            bw_label_at_height(&leaves, &s3, 0).unwrap(),
            bw_label(&leaves, &s3).unwrap().output
        );
    }

    #[test]
    fn joint_stats_star() {
        let j = exact_joint_stats(2, 1, 1.0);
        // P(A = 1) = P(both leaves empty) = 1/2 * 1 + 1/2 * 1/4.
        assert!((j.p[1][1] - 0.5).abs() < 1e-15);
        assert!((j.p[0][1] - 0.125).abs() < 1e-15);
        let total: f64 = j.p.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn joint_stats_zero_omega() {
        for h in [1, 3, 5] {
            let j = exact_joint_stats(3, h, 0.0);
            assert_eq!(j.p[0][1], 1.0);
            assert_eq!(j.r_eff, 0.0);
        }
        assert_eq!(exact_joint_stats(3, 2, 0.0).r_eff, 0.0);
    }

    #[test]
    fn ghat_base_cases() {
        let w = 0.4;
        let g = ghat_series(5, 3, w).unwrap();
        assert!((g.get(1) - 1.0 / 1.4).abs() < 1e-15);
        assert!((g.get(2) - (1.0 / 1.4) * (1.0 - (1.0f64 / 1.4).powi(3))).abs() < 1e-15);
        assert!(ghat_series(0, 3, w).is_err());
    }

    #[test]
    fn path_bound_small_cases() {
        let (p, q, a) = (0.7, 0.3, 1.9);
        assert!((spine_expectation(1, p, q, a) - (p * a + q)).abs() < 1e-15);
        assert!((spine_expectation(2, p, q, a) - (p * p * a * a + p * q * a + q * a)).abs() < 1e-14);
        for h in 0..20 {
            assert!((spine_expectation(h, p, q, 1.0) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn incremental_flips_match_full_relabel() {
        let s = TreeShape::new(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let c = broadcast_sample_with(&s, 0.8, &mut rng);
            let leaves = leaf_bits(&c, &s);
            let lab = bw_label(&leaves, &s).unwrap();
            let mut direct = 0;
            for i in 0..leaves.len() {
                let mut f = leaves.clone();
                f.flip(i);
                if bw_label(&f, &s).unwrap().output != lab.output {
                    direct += 1;
                }
            }
            assert_eq!(flip_count(&lab.labels, &s), direct);
        }
    }

    #[test]
    fn sensitivity_zero_omega_is_exact() {
        let s = TreeShape::new(2, 1).unwrap();
        let est = sensitivity_sample(&s, 0.0, 100, 1, true).unwrap();
        let exact = exact_broadcast_sensitivity(&s, 0.0, true).unwrap();
        assert!((exact - 2.0 / 3.0).abs() < 1e-15);
        assert!((est.mean - exact).abs() < 1e-14);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn bw_cut_star() {
        let s = TreeShape::new(2, 1).unwrap();
        let rep = bw_cut_conductance(
            &s,
            &WeightScheme::broadcast_omega(1.0, 2),
            &BoundaryCondition::free(&s),
            0,
        )
        .unwrap();
        assert!(rep.phi_u > 0.0);
        assert_eq!(rep.bound_holds, Some(true));
    }

    #[test]
    fn bw_cut_full_space_is_domain_error() {
        // With zero activities only the empty set remains and A = 1 on it.
        let s = TreeShape::new(2, 1).unwrap();
        let scheme = WeightScheme { internal_activity: 0.0, leaf_activity: 0.0 };
        let err = bw_cut_conductance(&s, &scheme, &BoundaryCondition::free(&s), 0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
