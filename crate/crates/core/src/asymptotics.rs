//! Closed-form quantities: the spine-chain expectation `E[a^{N_h}]`, the
//! branching threshold `b0(delta)`, and the predicted slowdown exponent.

use crate::error::{Error, Result};
use crate::model::omega_for_delta;

/// Two-state chain along a path: from 0 it stays at 0 with probability `p`
/// and moves to 1 with probability `q`; from 1 it always returns to 0.
/// `N_h` counts the visits to 0 in steps `1..=h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpineChainParams {
    pub p: f64,
    pub q: f64,
    pub a: f64,
    /// Added to both `p` and `q` for the inhomogeneous upper bound.
    pub delta_inhom: f64,
}

impl SpineChainParams {
    pub fn new(p: f64, q: f64, a: f64, delta_inhom: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) || (p + q - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("rates p={p}, q={q} must be probabilities summing to 1")));
        }
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Domain(format!("exponent base must be positive, got {a}")));
        }
        if !(delta_inhom >= 0.0) {
            return Err(Error::Domain(format!("inhomogeneity must be >= 0, got {delta_inhom}")));
        }
        Ok(Self { p, q, a, delta_inhom })
    }

    pub fn homogeneous(p: f64, a: f64) -> Result<Self> {
        Self::new(p, 1.0 - p, a, 0.0)
    }

    /// Rates used by the sums: `(p + delta, q + delta)`.
    pub fn effective_rates(&self) -> (f64, f64) {
        (self.p + self.delta_inhom, self.q + self.delta_inhom)
    }
}

/// `x ln y` with `0 ln 0 = 0`.
#[inline]
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `ln k!` for `k = 0..=n`, accumulated with compensated summation.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    table.push(0.0);
    for k in 1..=n {
        let y = (k as f64).ln() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        table.push(sum);
    }
    table
}

/// Natural log of
/// `sum_{k=0}^{h/2} C(h-k,k) p^{h-2k} q^k a^{h-k}
///  + sum_{k=1}^{(h+1)/2} C(h-k,k-1) p^{h-2k+1} q^k a^{h-k}`,
/// evaluated by log-sum-exp.
pub fn ln_exact_a_pow_n(h: usize, params: &SpineChainParams) -> Result<f64> {
    if h == 0 {
        return Err(Error::Domain("spine expectation needs h >= 1".into()));
    }
    let (p, q) = params.effective_rates();
    let la = params.a.ln();
    let lf = ln_factorials(h);
    let ln_choose = |n: usize, k: usize| lf[n] - lf[k] - lf[n - k];
    let mut terms = Vec::with_capacity(h + 2);
    for k in 0..=h / 2 {
        let e = (h - 2 * k) as f64;
        terms.push(ln_choose(h - k, k) + xlny(e, p) + xlny(k as f64, q) + (h - k) as f64 * la);
    }
    for k in 1..=(h + 1) / 2 {
        let e = (h + 1 - 2 * k) as f64;
        terms.push(ln_choose(h - k, k - 1) + xlny(e, p) + xlny(k as f64, q) + (h - k) as f64 * la);
    }
    Ok(log_sum_exp(&terms))
}

pub fn exact_a_pow_n(h: usize, params: &SpineChainParams) -> Result<f64> {
    Ok(ln_exact_a_pow_n(h, params)?.exp())
}

/// Compensated log-sum-exp.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &t in terms {
        let y = (t - max).exp() - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    max + sum.ln()
}

/// Natural log of
/// `(1 + p(1-eps)/(2 eps)) ((1+eps)/2) (pa/2 (1 + sqrt(1 + 4q/(a p^2))))^h`
/// with `eps = 1/sqrt(1 + 4q/(a p^2))`.
pub fn ln_approx_a_pow_n(h: usize, params: &SpineChainParams) -> Result<f64> {
    if h == 0 {
        return Err(Error::Domain("spine expectation needs h >= 1".into()));
    }
    let (p, q) = params.effective_rates();
    let a = params.a;
    if p == 0.0 {
        return Err(Error::Domain("closed form needs p > 0".into()));
    }
    let root = (1.0 + 4.0 * q / (a * p * p)).sqrt();
    let eps = 1.0 / root;
    let prefactor = (1.0 + p * (1.0 - eps) / (2.0 * eps)) * (1.0 + eps) / 2.0;
    let growth = p * a / 2.0 * (1.0 + root);
    Ok(prefactor.ln() + h as f64 * growth.ln())
}

pub fn approx_a_pow_n(h: usize, params: &SpineChainParams) -> Result<f64> {
    Ok(ln_approx_a_pow_n(h, params)?.exp())
}

/// Search cap for `b0`: the largest range where every integer is an exact
/// `f64`.
pub const B0_CAP: u64 = 1 << 53;

/// `ln(2.02 (omega b)^2 / lambda) - ln(ln 1.01)` for `omega = (1+delta) ln b / b`;
/// the condition `exp(2.02 (omega b)^2 / lambda) <= 1.01` holds iff this is
/// `<= 0`.
pub fn b0_condition(b: f64, delta: f64) -> f64 {
    let omega = (1.0 + delta) * b.ln() / b;
    2.02f64.ln() + omega.ln() + 2.0 * b.ln() - b * omega.ln_1p() - 1.01f64.ln().ln()
}

fn holds(b: u64, delta: f64) -> bool {
    b0_condition(b as f64, delta) <= 0.0
}

/// Smallest `b0 >= 2` such that the condition holds for every `b >= b0`.
///
/// A geometric scan (ratio 1.001) finds the last failing grid point, integer
/// bisection locates the crossing after it, a window of consecutive
/// integers above the answer is checked, and the tail past the cap is
/// checked to be decreasing over 64 doublings.
pub fn b0(delta: f64) -> Result<u64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("b0 needs delta > 0, got {delta}")));
    }
    if !holds(B0_CAP, delta) {
        return Err(Error::Budget(format!(
            "condition still fails at the search cap {B0_CAP} for delta={delta}"
        )));
    }
    // Tail past the cap: holds and decreasing.
    let mut prev = b0_condition(B0_CAP as f64, delta);
    let mut b = B0_CAP as f64;
    for _ in 0..64 {
        b *= 2.0;
        let cur = b0_condition(b, delta);
        if cur > prev || cur > 0.0 {
            return Err(Error::Budget(format!(
                "tail beyond {B0_CAP} is not certified for delta={delta}"
            )));
        }
        prev = cur;
    }
    let mut last_fail: Option<u64> = None;
    let mut next_hold = 2u64;
    let mut g = 2.0f64;
    let mut prev_int = 0u64;
    while g <= B0_CAP as f64 {
        let bi = g.round() as u64;
        if bi != prev_int {
            if holds(bi, delta) {
                if next_hold == u64::MAX {
                    next_hold = bi;
                }
            } else {
                last_fail = Some(bi);
                next_hold = u64::MAX;
            }
            prev_int = bi;
        }
        g = (g * 1.001).max(g + 1.0);
    }
    let Some(fail) = last_fail else {
        return Ok(2);
    };
    let mut hi = next_hold.min(B0_CAP);
    let mut lo = fail;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid, delta) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Near 1e15 consecutive integers differ by less than the rounding error
    // of the condition, so isolated failures can sit just above the
    // crossing. Move past them until a full window holds.
    for _ in 0..64 {
        let window = 10_000u64.min(B0_CAP - hi);
        match (hi..=hi + window).rev().find(|&k| !holds(k, delta)) {
            None => return Ok(hi),
            Some(bad) => hi = bad + 1,
        }
    }
    Err(Error::Consistency(format!("no stable threshold found near {hi} for delta={delta}")))
}

/// Predicted exponent `d = 1 + ln(lambda / (1.01 omega b)^2) / (2 ln b)` and
/// its distance from `1 + delta/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentReport {
    pub b: f64,
    pub delta: f64,
    pub d: f64,
    pub residual: f64,
}

pub fn exponent_d(b: f64, delta: f64) -> Result<ExponentReport> {
    if !(b >= 2.0) {
        return Err(Error::Domain(format!("branching factor must be >= 2, got {b}")));
    }
    if !(delta > -1.0) {
        return Err(Error::Domain(format!("delta must exceed -1, got {delta}")));
    }
    let omega = (1.0 + delta) * b.ln() / b;
    let ln_lambda = omega.ln() + b * omega.ln_1p();
    let d = 1.0 + (ln_lambda - 2.0 * (1.01 * omega * b).ln()) / (2.0 * b.ln());
    Ok(ExponentReport { b, delta, d, residual: d - (1.0 + delta / 2.0) })
}

/// `exponent_d` for an integer branching factor, checking `b >= 2`.
pub fn exponent_d_int(b: u64, delta: f64) -> Result<ExponentReport> {
    omega_for_delta(delta, b)?;
    exponent_d(b as f64, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_heights() {
        let sp = SpineChainParams::new(0.6, 0.4, 1.7, 0.0).unwrap();
        let (p, q, a) = (0.6, 0.4, 1.7);
        assert!((exact_a_pow_n(1, &sp).unwrap() - (p * a + q)).abs() < 1e-14);
        let two = p * p * a * a + p * q * a + q * a;
        assert!((exact_a_pow_n(2, &sp).unwrap() - two).abs() < 1e-14);
    }

    #[test]
    fn deterministic_chain_is_exact() {
        let sp = SpineChainParams::new(1.0, 0.0, 0.8, 0.0).unwrap();
        for h in [1, 5, 50] {
            let e = ln_exact_a_pow_n(h, &sp).unwrap();
            let a = ln_approx_a_pow_n(h, &sp).unwrap();
            assert!((e - h as f64 * 0.8f64.ln()).abs() < 1e-12);
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        assert!(SpineChainParams::new(0.5, 0.6, 1.0, 0.0).is_err());
        assert!(SpineChainParams::new(0.5, 0.5, 0.0, 0.0).is_err());
        assert!(SpineChainParams::new(0.5, 0.5, 1.0, -0.1).is_err());
    }

    #[test]
    fn b0_examples() {
        assert!(b0(1e6).unwrap() <= 2);
        let b1 = b0(1.0).unwrap();
        assert!(!holds(b1 - 1, 1.0));
        assert!(holds(b1, 1.0));
        assert!(matches!(b0(0.0), Err(Error::Domain(_))));
        assert!(matches!(b0(0.1), Err(Error::Budget(_))));
    }

    #[test]
    fn exponent_limit() {
        let r = exponent_d(1e9, 1.0).unwrap();
        assert!(r.residual.abs() < 0.1);
        assert!(exponent_d(1.0, 1.0).is_err());
    }
}
