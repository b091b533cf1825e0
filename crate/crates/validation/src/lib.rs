//! Slow, direct reference computations. Nothing here shares code paths with
//! the recursions in `hctree`; they exist to be compared against it.

use hctree::model::{BoundaryCondition, Configuration, TreeShape};

/// Largest vertex count for the bitmask oracles.
pub const BRUTE_MAX_VERTICES: usize = 24;

/// Every subset of the vertices that is an independent set and agrees with
/// `boundary`, found by scanning all `2^n` bitmasks.
pub fn brute_force_states(shape: &TreeShape, boundary: &BoundaryCondition) -> Vec<Configuration> {
    let n = shape.n();
    assert!(n <= BRUTE_MAX_VERTICES, "{n} vertices is too many for the bitmask scan");
    let mut out = Vec::new();
    'mask: for mask in 0u32..(1u32 << n) {
        for v in 1..n {
            let p = (v - 1) / shape.b();
            if mask >> v & 1 == 1 && mask >> p & 1 == 1 {
                continue 'mask;
            }
        }
        for v in shape.leaves() {
            if let Some(spin) = boundary.fixed(shape, v) {
                if (mask >> v & 1 == 1) != spin {
                    continue 'mask;
                }
            }
        }
        let ones: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        out.push(Configuration::from_ones(n, &ones));
    }
    out
}

/// Gibbs probabilities `prod_v a_v^{sigma_v} / Z` of `states`.
pub fn gibbs_probs(states: &[Configuration], activity: impl Fn(usize) -> f64) -> Vec<f64> {
    let w: Vec<f64> = states.iter().map(|s| s.ones().map(&activity).product()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Per-vertex occupation probabilities.
pub fn marginals(states: &[Configuration], probs: &[f64], n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n];
    for (s, p) in states.iter().zip(probs) {
        for v in s.ones() {
            m[v] += p;
        }
    }
    m
}

/// Dense heat-bath transition matrix on `states`: a vertex is drawn uniformly
/// from `movable`, then resampled given its neighbours with occupation
/// probability `occ(v)` when all neighbours are empty.
pub fn dense_heat_bath(
    shape: &TreeShape,
    states: &[Configuration],
    movable: &[usize],
    occ: impl Fn(usize) -> f64,
) -> Vec<Vec<f64>> {
    let k = states.len();
    let mut p = vec![vec![0.0; k]; k];
    let index = |c: &Configuration| states.iter().position(|s| s == c);
    let share = 1.0 / movable.len() as f64;
    for (i, s) in states.iter().enumerate() {
        for &v in movable {
            let blocked = shape.parent(v).is_some_and(|u| s.get(u)) || shape.children(v).any(|w| s.get(w));
            let up = if blocked { 0.0 } else { occ(v) };
            for (spin, prob) in [(true, up), (false, 1.0 - up)] {
                if prob == 0.0 {
                    continue;
                }
                let mut t = s.clone();
                t.set(v, spin);
                let j = index(&t).expect("heat-bath move stays in the state list");
                p[i][j] += share * prob;
            }
        }
    }
    p
}

/// `E[a^{N_h}]` for the two-state path chain (from 0: stay w.p. `p`, move to
/// 1 w.p. `q`; from 1: back to 0), summed over all `2^h` paths from state 0.
pub fn spine_paths(h: usize, p: f64, q: f64, a: f64) -> f64 {
    assert!(h < 32);
    let mut total = 0.0;
    for mask in 0u32..(1 << h) {
        let (mut prob, mut weight, mut prev_occ) = (1.0, 1.0, false);
        for i in 0..h {
            let occ = mask >> i & 1 == 1;
            prob *= match (prev_occ, occ) {
                (true, true) => 0.0,
                (true, false) => 1.0,
                (false, true) => q,
                (false, false) => p,
            };
            if !occ {
                weight *= a;
            }
            prev_occ = occ;
        }
        total += prob * weight;
    }
    total
}

/// Least-squares slope of `ys` against `1, 2, ..`.
pub fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xm = (n + 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let x = i as f64 + 1.0;
        num += (x - xm) * (y - ym);
        den += (x - xm) * (x - xm);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_closed_form() {
        for (b, h) in [(2, 2), (3, 1), (2, 3)] {
            let shape = TreeShape::new(b, h).unwrap();
            let states = brute_force_states(&shape, &BoundaryCondition::free(&shape));
            assert_eq!(states.len() as u128, hctree::model::independent_set_count(b, h));
        }
    }

    #[test]
    fn spine_one_step() {
        assert!((spine_paths(1, 0.3, 0.7, 2.0) - (0.3 * 2.0 + 0.7)).abs() < 1e-15);
    }
}
