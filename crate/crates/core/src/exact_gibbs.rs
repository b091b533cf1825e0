//! Exact Gibbs computations: transfer-matrix marginals, enumeration of small
//! state spaces, and the top-down broadcast process.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numfmt::fmt_f64;
use crate::model::{
    for_each_state, state_count, BoundaryCondition, Configuration, ModelParams, TreeShape,
};

/// Default cap on the number of enumerated states.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// Activities for internal vertices and for leaves.
///
/// Equal activities give the uniform hard-core model; leaf activity `omega`
/// with internal activity `lambda` gives the measure generated by the
/// broadcast process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightScheme {
    pub internal_activity: f64,
    pub leaf_activity: f64,
}

impl WeightScheme {
    pub fn uniform(lambda: f64) -> Self {
        Self { internal_activity: lambda, leaf_activity: lambda }
    }

    pub fn broadcast(params: &ModelParams) -> Self {
        Self { internal_activity: params.lambda, leaf_activity: params.omega }
    }

    /// Broadcast weights for a given `omega`, with `lambda = omega (1+omega)^b`.
    pub fn broadcast_omega(omega: f64, b: usize) -> Self {
        Self {
            internal_activity: crate::model::lambda_from_omega(omega, b as f64),
            leaf_activity: omega,
        }
    }

    #[inline]
    pub fn activity(&self, shape: &TreeShape, v: usize) -> f64 {
        if shape.is_leaf(v) {
            self.leaf_activity
        } else {
            self.internal_activity
        }
    }

    fn check(&self) -> Result<()> {
        for a in [self.internal_activity, self.leaf_activity] {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::Domain(format!("activity must be finite and >= 0, got {a}")));
            }
        }
        Ok(())
    }

    /// Heat-bath occupation probability `a/(1+a)` for every vertex.
    pub fn occupation_probs(&self, shape: &TreeShape) -> Vec<f64> {
        (0..shape.n())
            .map(|v| {
                let a = self.activity(shape, v);
                a / (1.0 + a)
            })
            .collect()
    }
}

/// Exact per-vertex occupation probabilities and the log partition function.
#[derive(Debug, Clone)]
pub struct MarginalTable {
    pub depth: Vec<usize>,
    /// Marginal probability that the vertex is occupied.
    pub p_occ: Vec<f64>,
    /// Probability that the vertex is occupied given its parent is not
    /// (for the root this equals `p_occ`).
    pub p_occ_given_parent_free: Vec<f64>,
    /// `Z(v occupied) / Z(v unoccupied)` for the subtree of `v`.
    pub ratio: Vec<f64>,
    pub log_z: f64,
}

impl MarginalTable {
    /// `mu(r = 1) / (omega mu(r = 0))` at the root.
    pub fn root_q_value(&self, omega: f64) -> f64 {
        self.ratio[0] / omega
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["vertex_id", "depth", "p_occ", "p_occ_given_parent_free"])
            .map_err(io)?;
        for v in 0..self.p_occ.len() {
            w.write_record([
                v.to_string(),
                self.depth[v].to_string(),
                fmt_f64(self.p_occ[v]),
                fmt_f64(self.p_occ_given_parent_free[v]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Bottom-up ratio recursion `R(v) = a_v * prod_children 1/(1+R(w))`
/// followed by a top-down pass for the marginals.
///
/// Occupied boundary leaves have `R = inf`, which zeroes their parent's
/// ratio; this is the trimming of occupied leaves and their parents.
pub fn subtree_marginals(
    shape: &TreeShape,
    boundary: &BoundaryCondition,
    scheme: &WeightScheme,
) -> Result<MarginalTable> {
    boundary.check_shape(shape)?;
    scheme.check()?;
    let n = shape.n();
    let mut ratio = vec![0.0f64; n];
    // log of the subtree partition function.
    let mut log_t = vec![0.0f64; n];
    for v in (0..n).rev() {
        let a = scheme.activity(shape, v);
        if shape.is_leaf(v) {
            match boundary.fixed(shape, v) {
                Some(true) => {
                    ratio[v] = f64::INFINITY;
                    log_t[v] = a.ln();
                }
                Some(false) => {
                    ratio[v] = 0.0;
                    log_t[v] = 0.0;
                }
                None => {
                    ratio[v] = a;
                    log_t[v] = a.ln_1p();
                }
            }
        } else {
            let mut prod = a;
            let mut log_empty = 0.0;
            for w in shape.children(v) {
                prod /= 1.0 + ratio[w];
                log_empty += log_t[w];
            }
            ratio[v] = prod;
            log_t[v] = log_empty + prod.ln_1p();
        }
    }
    let given: Vec<f64> = ratio.iter().map(|&r| ratio_to_prob(r)).collect();
    let mut p_occ = vec![0.0f64; n];
    let mut depth = vec![0usize; n];
    for v in 0..n {
        match shape.parent(v) {
            None => p_occ[v] = given[v],
            Some(p) => {
                p_occ[v] = (1.0 - p_occ[p]) * given[v];
                depth[v] = depth[p] + 1;
            }
        }
    }
    Ok(MarginalTable { depth, p_occ, p_occ_given_parent_free: given, ratio, log_z: log_t[0] })
}

#[inline]
fn ratio_to_prob(r: f64) -> f64 {
    if r.is_infinite() {
        1.0
    } else {
        r / (1.0 + r)
    }
}

/// Enumerated state space with normalized Gibbs probabilities.
#[derive(Debug, Clone)]
pub struct StateDistribution {
    pub states: Vec<Configuration>,
    pub probs: Vec<f64>,
}

impl StateDistribution {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Per-vertex occupation probabilities.
    pub fn marginals(&self, n: usize) -> Vec<f64> {
        let mut m = vec![0.0; n];
        for (s, &p) in self.states.iter().zip(&self.probs) {
            for v in s.ones() {
                m[v] += p;
            }
        }
        m
    }

    /// Probability of the event `pred`.
    pub fn probability<F: Fn(&Configuration) -> bool>(&self, pred: F) -> f64 {
        self.states.iter().zip(&self.probs).filter(|(s, _)| pred(s)).map(|(_, &p)| p).sum()
    }
}

/// Fails with a capacity error when the compatible state count exceeds `limit`.
pub fn check_capacity(shape: &TreeShape, boundary: &BoundaryCondition, limit: f64) -> Result<f64> {
    let estimated = state_count(shape, boundary);
    if estimated > limit {
        return Err(Error::Capacity { estimated, limit });
    }
    Ok(estimated)
}

/// All independent sets compatible with `boundary`, weighted by `scheme`.
pub fn enumerate_states(
    shape: &TreeShape,
    boundary: &BoundaryCondition,
    scheme: &WeightScheme,
) -> Result<StateDistribution> {
    enumerate_states_with_limit(shape, boundary, scheme, ENUMERATION_LIMIT)
}

pub fn enumerate_states_with_limit(
    shape: &TreeShape,
    boundary: &BoundaryCondition,
    scheme: &WeightScheme,
    limit: f64,
) -> Result<StateDistribution> {
    boundary.check_shape(shape)?;
    scheme.check()?;
    let estimated = check_capacity(shape, boundary, limit)?;
    let log_a: Vec<f64> = (0..shape.n()).map(|v| scheme.activity(shape, v).ln()).collect();
    let mut states = Vec::with_capacity(estimated as usize);
    let mut logw = Vec::with_capacity(estimated as usize);
    for_each_state(shape, boundary, |s| {
        logw.push(s.ones().map(|v| log_a[v]).sum::<f64>());
        states.push(s.clone());
    });
    let probs = normalize_log_weights(&logw)?;
    Ok(StateDistribution { states, probs })
}

pub(crate) fn normalize_log_weights(logw: &[f64]) -> Result<Vec<f64>> {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Domain("all states have zero weight".into()));
    }
    let mut probs: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Occupation probability `omega / (1 + omega)`, with `omega = inf` giving 1.
#[inline]
pub fn broadcast_occupation(omega: f64) -> f64 {
    if omega.is_infinite() {
        1.0
    } else {
        omega / (1.0 + omega)
    }
}

/// One draw of the broadcast process: the root is occupied with probability
/// `omega/(1+omega)`, every other vertex with that probability if its parent
/// is unoccupied and never otherwise.
pub fn broadcast_sample_with<R: Rng + ?Sized>(
    shape: &TreeShape,
    omega: f64,
    rng: &mut R,
) -> Configuration {
    let q = broadcast_occupation(omega);
    let mut c = Configuration::zeros(shape.n());
    for v in 0..shape.n() {
        let parent_occ = shape.parent(v).is_some_and(|p| c.get(p));
        if !parent_occ && rng.random::<f64>() < q {
            c.set(v, true);
        }
    }
    c
}

pub fn broadcast_sample(shape: &TreeShape, omega: f64, rng_seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    broadcast_sample_with(shape, omega, &mut rng)
}

/// Probability of `config` under the broadcast process, as a product of the
/// top-down conditional probabilities.
pub fn broadcast_probability(config: &Configuration, shape: &TreeShape, omega: f64) -> f64 {
    let q = broadcast_occupation(omega);
    let mut p = 1.0;
    for v in 0..shape.n() {
        let occ = config.get(v);
        let parent_occ = shape.parent(v).is_some_and(|u| config.get(u));
        p *= match (parent_occ, occ) {
            (true, true) => 0.0,
            (true, false) => 1.0,
            (false, true) => q,
            (false, false) => 1.0 - q,
        };
    }
    p
}

/// Total-variation distance between the broadcast-weighted Gibbs measure and
/// the broadcast process, both evaluated on the enumerated free state space.
pub fn check_broadcast_equivalence(shape: &TreeShape, params: &ModelParams) -> Result<f64> {
    let free = BoundaryCondition::free(shape);
    let dist = enumerate_states(shape, &free, &WeightScheme::broadcast(params))?;
    let mut tv = 0.0;
    let mut broadcast_mass = 0.0;
    for (s, &p) in dist.states.iter().zip(&dist.probs) {
        let q = broadcast_probability(s, shape, params.omega);
        broadcast_mass += q;
        tv += (p - q).abs();
    }
    // Mass the broadcast process puts outside the enumerated support.
    tv += (1.0 - broadcast_mass).max(0.0);
    Ok(0.5 * tv)
}

/// Bottom-up ratio recursion fed one leaf spin at a time, in leaf order.
///
/// Memory is `O(h)`, so boundaries far too large to store vertex arrays for
/// can still be evaluated exactly.
#[derive(Debug, Clone)]
pub struct StreamingRootDp {
    b: usize,
    h: usize,
    scheme: WeightScheme,
    /// Running product of `1/(1+R(child))` for the open vertex at each depth.
    prod: Vec<f64>,
    log_empty: Vec<f64>,
    count: Vec<usize>,
    leaves_seen: u64,
    track_log_z: bool,
    result: Option<(f64, f64)>,
}

impl StreamingRootDp {
    pub fn new(b: usize, h: usize, scheme: WeightScheme) -> Self {
        Self {
            b,
            h,
            scheme,
            prod: vec![1.0; h],
            log_empty: vec![0.0; h],
            count: vec![0; h],
            leaves_seen: 0,
            track_log_z: true,
            result: None,
        }
    }

    /// Like `new` but skips the partition function; `finish` then reports
    /// `NaN` for `ln Z`.
    pub fn ratio_only(b: usize, h: usize, scheme: WeightScheme) -> Self {
        Self { track_log_z: false, ..Self::new(b, h, scheme) }
    }

    /// Feeds the next boundary leaf (occupied or not).
    pub fn push_leaf(&mut self, occupied: bool) {
        let a = self.scheme.leaf_activity;
        let (r, log_t) = if occupied { (f64::INFINITY, a.ln()) } else { (0.0, 0.0) };
        self.leaves_seen += 1;
        self.push(self.h, r, log_t);
    }

    pub fn push_leaves(&mut self, bits: &[bool]) {
        for &bit in bits {
            self.push_leaf(bit);
        }
    }

    /// Feeds the `b` leaves below one height-1 vertex at once. Must be
    /// aligned with a block boundary, which holds whenever all input goes
    /// through this method.
    pub fn push_block(&mut self, bits: &[bool]) {
        if self.h == 0 || bits.len() != self.b || self.count[self.h - 1] != 0 {
            self.push_leaves(bits);
            return;
        }
        let occupied = bits.iter().filter(|&&x| x).count();
        self.leaves_seen += self.b as u64;
        let r = if occupied > 0 { 0.0 } else { self.scheme.internal_activity };
        let log_t = if !self.track_log_z {
            f64::NAN
        } else if occupied > 0 {
            occupied as f64 * self.scheme.leaf_activity.ln()
        } else {
            r.ln_1p()
        };
        self.push(self.h - 1, r, log_t);
    }

    fn push(&mut self, depth: usize, mut r: f64, mut log_t: f64) {
        let mut d = depth;
        loop {
            if d == 0 {
                self.result = Some((r, log_t));
                return;
            }
            let p = d - 1;
            self.prod[p] /= 1.0 + r;
            self.log_empty[p] += log_t;
            self.count[p] += 1;
            if self.count[p] < self.b {
                return;
            }
            r = self.scheme.internal_activity * self.prod[p];
            if self.track_log_z {
                log_t = self.log_empty[p] + r.ln_1p();
            }
            self.prod[p] = 1.0;
            self.log_empty[p] = 0.0;
            self.count[p] = 0;
            d = p;
        }
    }

    /// Root ratio `Z(r occupied)/Z(r unoccupied)` and `ln Z`.
    pub fn finish(self) -> Result<(f64, f64)> {
        let expected = (self.b as u64).checked_pow(self.h as u32);
        if Some(self.leaves_seen) != expected {
            return Err(Error::Structural(format!(
                "streamed {} leaves, expected {:?}",
                self.leaves_seen, expected
            )));
        }
        self.result.ok_or_else(|| Error::Structural("height-0 tree has no boundary".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BitPattern;

    #[test]
    fn single_vertex_marginal() {
        let s = TreeShape::new(2, 0).unwrap();
        let m = subtree_marginals(&s, &BoundaryCondition::free(&s), &WeightScheme::uniform(3.0))
            .unwrap();
        assert!((m.p_occ[0] - 0.75).abs() < 1e-15);
        assert!((m.log_z - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn star_marginal_and_partition_function() {
        let s = TreeShape::new(2, 1).unwrap();
        let m = subtree_marginals(&s, &BoundaryCondition::free(&s), &WeightScheme::uniform(1.0))
            .unwrap();
        assert!((m.p_occ[0] - 0.2).abs() < 1e-15);
        assert!((m.log_z - 5f64.ln()).abs() < 1e-15);
        assert!((m.p_occ[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn broadcast_scheme_has_constant_conditionals() {
        for h in 0..6 {
            let s = TreeShape::new(2, h).unwrap();
            let params = ModelParams::from_omega(1.0, 2).unwrap();
            let m = subtree_marginals(&s, &BoundaryCondition::free(&s), &WeightScheme::broadcast(&params))
                .unwrap();
            for &p in &m.p_occ_given_parent_free {
                assert!((p - 0.5).abs() < 1e-12, "h={h} p={p}");
            }
        }
    }

    #[test]
    fn enumeration_examples() {
        let s0 = TreeShape::new(2, 0).unwrap();
        let d = enumerate_states(&s0, &BoundaryCondition::free(&s0), &WeightScheme::uniform(1.0))
            .unwrap();
        assert_eq!(d.probs, vec![0.5, 0.5]);
        let s = TreeShape::new(2, 1).unwrap();
        let d = enumerate_states(&s, &BoundaryCondition::free(&s), &WeightScheme::uniform(1.0))
            .unwrap();
        assert_eq!(d.len(), 5);
        assert!(d.probs.iter().all(|&p| (p - 0.2).abs() < 1e-15));
        let both = BoundaryCondition::explicit(&s, BitPattern::from_ones(2, &[0, 1])).unwrap();
        let d = enumerate_states(&s, &both, &WeightScheme::uniform(1.0)).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.probs[0], 1.0);
    }

    #[test]
    fn enumeration_capacity_error_carries_estimate() {
        let s = TreeShape::new(2, 4).unwrap();
        let err = enumerate_states_with_limit(
            &s,
            &BoundaryCondition::free(&s),
            &WeightScheme::uniform(1.0),
            1e4,
        )
        .unwrap_err();
        match err {
            Error::Capacity { estimated, .. } => assert!(estimated > 5e6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn broadcast_sampler_limits() {
        let s = TreeShape::new(3, 3).unwrap();
        assert_eq!(broadcast_sample(&s, 0.0, 7).count_ones(), 0);
        let c = broadcast_sample(&s, f64::INFINITY, 7);
        for v in 0..s.n() {
            assert_eq!(c.get(v), s.depth(v) % 2 == 0);
        }
        assert_eq!(broadcast_sample(&s, 0.7, 11), broadcast_sample(&s, 0.7, 11));
    }

    #[test]
    fn broadcast_equivalence_small() {
        let s = TreeShape::new(2, 1).unwrap();
        let tv = check_broadcast_equivalence(&s, &ModelParams::from_omega(1.0, 2).unwrap()).unwrap();
        assert!(tv < 1e-12);
        let s0 = TreeShape::new(2, 0).unwrap();
        let tv = check_broadcast_equivalence(&s0, &ModelParams::from_omega(0.3, 2).unwrap()).unwrap();
        assert!(tv < 1e-15);
    }

    #[test]
    fn streaming_dp_matches_vertex_arrays() {
        let s = TreeShape::new(3, 3).unwrap();
        let bits = BitPattern::from_ones(27, &[0, 4, 5, 13, 26]);
        let bd = BoundaryCondition::explicit(&s, bits.clone()).unwrap();
        let scheme = WeightScheme::uniform(1.7);
        let m = subtree_marginals(&s, &bd, &scheme).unwrap();
        let mut dp = StreamingRootDp::new(3, 3, scheme);
        dp.push_leaves(&bits.to_bools());
        let (r, log_z) = dp.finish().unwrap();
        assert!((r - m.ratio[0]).abs() < 1e-14);
        assert!((log_z - m.log_z).abs() < 1e-12);
    }

    #[test]
    fn marginal_csv_layout() {
        let s = TreeShape::new(2, 1).unwrap();
        let m = subtree_marginals(&s, &BoundaryCondition::free(&s), &WeightScheme::uniform(1.0))
            .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "vertex_id,depth,p_occ,p_occ_given_parent_free");
        assert_eq!(lines.next().unwrap(), "0,0,2.0000000000000001e-1,2.0000000000000001e-1");
    }
}
