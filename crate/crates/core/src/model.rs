//! Tree topology, model parameters, configurations and boundary conditions.
//!
//! Vertices of the complete `b`-ary tree of height `h` are indexed in level
//! order: the root is `0` and the children of `v` are `b*v + 1 ..= b*v + b`.
//! The leaves are therefore the last `b^h` indices.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported branching factor for materialized trees.
pub const MAX_BRANCHING: usize = 1 << 16;
/// Largest supported height for materialized trees.
pub const MAX_HEIGHT: usize = 60;

/// Complete `b`-ary tree of height `h` in level order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeShape {
    b: usize,
    h: usize,
    n: usize,
    first_leaf: usize,
}

impl TreeShape {
    /// Builds the shape, checking the vertex count for overflow.
    ///
    /// `b = 1` is accepted and yields a path; it is only used for the
    /// single-leaf star.
    pub fn new(b: usize, h: usize) -> Result<Self> {
        if b == 0 || b > MAX_BRANCHING {
            return Err(Error::Domain(format!(
                "branching factor {b} outside 1..={MAX_BRANCHING}"
            )));
        }
        if h > MAX_HEIGHT {
            return Err(Error::Domain(format!("height {h} exceeds {MAX_HEIGHT}")));
        }
        let overflow = || Error::Domain(format!("vertex count of b={b}, h={h} overflows"));
        let mut level = 1usize;
        let mut n = 1usize;
        let mut first_leaf = 0usize;
        for _ in 0..h {
            first_leaf = n;
            level = level.checked_mul(b).ok_or_else(overflow)?;
            n = n.checked_add(level).ok_or_else(overflow)?;
        }
        Ok(Self { b, h, n, first_leaf })
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn h(&self) -> usize {
        self.h
    }

    /// Number of vertices, `(b^(h+1) - 1) / (b - 1)`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_leaves(&self) -> usize {
        self.n - self.first_leaf
    }

    pub fn first_leaf(&self) -> usize {
        self.first_leaf
    }

    pub fn leaves(&self) -> Range<usize> {
        self.first_leaf..self.n
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v >= self.first_leaf
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v > 0).then(|| (v - 1) / self.b)
    }

    /// Children of `v`; empty for leaves.
    pub fn children(&self, v: usize) -> Range<usize> {
        if self.is_leaf(v) {
            0..0
        } else {
            let start = self.b * v + 1;
            start..start + self.b
        }
    }

    /// Index of the first vertex at depth `d`.
    pub fn level_start(&self, d: usize) -> usize {
        (0..d).fold(0usize, |acc, k| acc + self.b.pow(k as u32))
    }

    /// Vertices at depth `d`.
    pub fn level(&self, d: usize) -> Range<usize> {
        let start = self.level_start(d);
        start..start + self.b.pow(d as u32)
    }

    pub fn depth(&self, v: usize) -> usize {
        let mut d = 0;
        let mut u = v;
        while u > 0 {
            u = (u - 1) / self.b;
            d += 1;
        }
        d
    }

    /// Vertices on the path from `v` up to the root, `v` first.
    pub fn path_to_root(&self, v: usize) -> Vec<usize> {
        let mut path = vec![v];
        let mut u = v;
        while let Some(p) = self.parent(u) {
            path.push(p);
            u = p;
        }
        path
    }
}

/// Positive root `omega` of `lambda = omega * (1 + omega)^b`.
///
/// Bisection on `[0, max(lambda, 1)]` followed by Newton steps on the
/// logarithmic form, which is strictly increasing in `omega`.
pub fn solve_omega(lambda: f64, b: u64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("activity must be positive, got {lambda}")));
    }
    if b == 0 {
        return Err(Error::Domain("branching factor must be at least 1".into()));
    }
    let bf = b as f64;
    let target = lambda.ln();
    let g = |w: f64| w.ln() + bf * w.ln_1p() - target;

    let mut lo = 0.0f64;
    let mut hi = lambda.max(1.0);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut w = 0.5 * (lo + hi);
    if w <= 0.0 {
        w = hi;
    }
    for _ in 0..8 {
        let step = g(w) / (1.0 / w + bf / (1.0 + w));
        let next = w - step;
        if !(next > 0.0) || !next.is_finite() {
            break;
        }
        w = next;
        if step.abs() <= 1e-17 * w {
            break;
        }
    }
    Ok(w)
}

/// `omega * (1 + omega)^b`, evaluated in log space.
pub fn lambda_from_omega(omega: f64, b: f64) -> f64 {
    if omega == 0.0 {
        return 0.0;
    }
    (omega.ln() + b * omega.ln_1p()).exp()
}

/// `(1 + delta) ln b / b`.
pub fn omega_for_delta(delta: f64, b: u64) -> Result<f64> {
    if b < 2 {
        return Err(Error::Domain(format!("branching factor must be at least 2, got {b}")));
    }
    if !(delta > -1.0) {
        return Err(Error::Domain(format!("delta must exceed -1, got {delta}")));
    }
    let bf = b as f64;
    Ok((1.0 + delta) * bf.ln() / bf)
}

/// Uniqueness threshold `b^b / (b-1)^(b+1)`.
pub fn uniqueness_threshold(b: u64) -> Result<f64> {
    if b < 2 {
        return Err(Error::Domain(format!("branching factor must be at least 2, got {b}")));
    }
    let bf = b as f64;
    if b <= 64 {
        Ok(bf.powi(b as i32) / (bf - 1.0).powi(b as i32 + 1))
    } else {
        Ok((bf * bf.ln() - (bf + 1.0) * (bf - 1.0).ln()).exp())
    }
}

/// Leading-order reconstruction threshold `(ln b + ln ln b) / b`.
pub fn reconstruction_omega_estimate(b: u64) -> f64 {
    let bf = b as f64;
    (bf.ln() + bf.ln().ln()) / bf
}

/// Activity `lambda` together with its broadcast parameter `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub omega: f64,
    pub delta: Option<f64>,
}

impl ModelParams {
    pub fn from_lambda(lambda: f64, b: u64) -> Result<Self> {
        let omega = solve_omega(lambda, b)?;
        Ok(Self { lambda, omega, delta: None })
    }

    pub fn from_omega(omega: f64, b: u64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Domain(format!("omega must be positive, got {omega}")));
        }
        Ok(Self { lambda: lambda_from_omega(omega, b as f64), omega, delta: None })
    }

    pub fn from_delta(delta: f64, b: u64) -> Result<Self> {
        let omega = omega_for_delta(delta, b)?;
        let mut params = Self::from_omega(omega, b)?;
        params.delta = Some(delta);
        Ok(params)
    }
}

/// Occupancy bit pattern, indexed by vertex id (or leaf id for boundaries).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitPattern {
    len: usize,
    words: Vec<u64>,
}

/// An occupancy pattern over all vertices of a tree.
pub type Configuration = BitPattern;

impl BitPattern {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut p = Self::zeros(bits.len());
        for (i, &bit) in bits.iter().enumerate() {
            if bit {
                p.set(i, true);
            }
        }
        p
    }

    pub fn from_ones(len: usize, ones: &[usize]) -> Self {
        let mut p = Self::zeros(len);
        for &i in ones {
            p.set(i, true);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Hex encoding with index 0 as the most significant bit of the
    /// left-zero-padded number.
    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4);
        let pad = digits * 4 - self.len;
        let mut out = String::with_capacity(digits);
        for d in 0..digits {
            let mut nibble = 0u32;
            for k in 0..4 {
                let pos = d * 4 + k;
                let bit = pos >= pad && self.get(pos - pad);
                nibble = (nibble << 1) | bit as u32;
            }
            out.push(char::from_digit(nibble, 16).unwrap());
        }
        out
    }

    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        let digits = len.div_ceil(4);
        if hex.len() != digits {
            return Err(Error::Parse(format!(
                "expected {digits} hex digits for {len} bits, got {}",
                hex.len()
            )));
        }
        let pad = digits * 4 - len;
        let mut p = Self::zeros(len);
        for (d, ch) in hex.chars().enumerate() {
            let nibble = ch
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("invalid hex digit {ch:?}")))?;
            for k in 0..4 {
                let pos = d * 4 + k;
                let bit = nibble >> (3 - k) & 1 == 1;
                if pos < pad {
                    if bit {
                        return Err(Error::Parse("non-zero padding bit".into()));
                    }
                } else if bit {
                    p.set(pos - pad, true);
                }
            }
        }
        Ok(p)
    }
}

impl fmt::Debug for BitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitPattern({}: ", self.len)?;
        for i in 0..self.len.min(128) {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        if self.len > 128 {
            f.write_str("...")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryKind {
    #[serde(rename = "free")]
    Free,
    #[serde(rename = "explicit")]
    Explicit,
    #[serde(rename = "U")]
    Upper,
    #[serde(rename = "L")]
    Lower,
}

impl BoundaryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryKind::Free => "free",
            BoundaryKind::Explicit => "explicit",
            BoundaryKind::Upper => "U",
            BoundaryKind::Lower => "L",
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fixed occupancy of the leaves, or no constraint at all.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    b: usize,
    h: usize,
    kind: BoundaryKind,
    leaves: Option<BitPattern>,
}

/// Wire form `{b, h, kind, leaf_bits}`; `leaf_bits` is empty for the free
/// boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryJson {
    pub b: usize,
    pub h: usize,
    pub kind: BoundaryKind,
    pub leaf_bits: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<serde_json::Value>,
}

impl BoundaryCondition {
    pub fn free(shape: &TreeShape) -> Self {
        Self { b: shape.b(), h: shape.h(), kind: BoundaryKind::Free, leaves: None }
    }

    pub fn explicit(shape: &TreeShape, leaves: BitPattern) -> Result<Self> {
        Self::with_kind(shape, leaves, BoundaryKind::Explicit)
    }

    pub fn with_kind(shape: &TreeShape, leaves: BitPattern, kind: BoundaryKind) -> Result<Self> {
        if kind == BoundaryKind::Free {
            return Err(Error::Domain("free boundary carries no leaf pattern".into()));
        }
        if leaves.len() != shape.num_leaves() {
            return Err(Error::Structural(format!(
                "boundary has {} bits, tree has {} leaves",
                leaves.len(),
                shape.num_leaves()
            )));
        }
        Ok(Self { b: shape.b(), h: shape.h(), kind, leaves: Some(leaves) })
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn is_free(&self) -> bool {
        self.leaves.is_none()
    }

    pub fn leaf_bits(&self) -> Option<&BitPattern> {
        self.leaves.as_ref()
    }

    pub fn check_shape(&self, shape: &TreeShape) -> Result<()> {
        if self.b != shape.b() || self.h != shape.h() {
            return Err(Error::Structural(format!(
                "boundary is for b={}, h={} but tree is b={}, h={}",
                self.b,
                self.h,
                shape.b(),
                shape.h()
            )));
        }
        Ok(())
    }

    /// Fixed spin of vertex `v`, if the boundary pins it.
    #[inline]
    pub fn fixed(&self, shape: &TreeShape, v: usize) -> Option<bool> {
        match &self.leaves {
            Some(bits) if shape.is_leaf(v) => Some(bits.get(v - shape.first_leaf())),
            _ => None,
        }
    }

    /// Vertices whose spin the dynamics may change.
    pub fn free_vertices(&self, shape: &TreeShape) -> Vec<usize> {
        (0..shape.n()).filter(|&v| self.fixed(shape, v).is_none()).collect()
    }

    pub fn to_json(&self) -> BoundaryJson {
        BoundaryJson {
            b: self.b,
            h: self.h,
            kind: self.kind,
            leaf_bits: self.leaves.as_ref().map(BitPattern::to_hex).unwrap_or_default(),
            composition: None,
        }
    }

    pub fn from_json(json: &BoundaryJson) -> Result<Self> {
        let shape = TreeShape::new(json.b, json.h)?;
        match json.kind {
            BoundaryKind::Free => {
                if !json.leaf_bits.is_empty() {
                    return Err(Error::Parse("free boundary must have empty leaf_bits".into()));
                }
                Ok(Self::free(&shape))
            }
            kind => {
                let bits = BitPattern::from_hex(shape.num_leaves(), &json.leaf_bits)?;
                Self::with_kind(&shape, bits, kind)
            }
        }
    }
}

/// True iff `config` is an independent set that agrees with `boundary` on
/// every leaf.
pub fn validate(
    config: &Configuration,
    shape: &TreeShape,
    boundary: &BoundaryCondition,
) -> Result<bool> {
    if config.len() != shape.n() {
        return Err(Error::Structural(format!(
            "configuration has {} bits, tree has {} vertices",
            config.len(),
            shape.n()
        )));
    }
    boundary.check_shape(shape)?;
    for v in config.ones() {
        if let Some(p) = shape.parent(v) {
            if config.get(p) {
                return Ok(false);
            }
        }
    }
    if let Some(bits) = boundary.leaf_bits() {
        for (i, leaf) in shape.leaves().enumerate() {
            if bits.get(i) != config.get(leaf) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Independent-set count of the free tree via `a_h = (a_{h-1} + c_{h-1})^b`,
/// `c_h = a_{h-1}^b`. Saturates at `u128::MAX`.
pub fn independent_set_count(b: usize, h: usize) -> u128 {
    let (mut a, mut c) = (1u128, 1u128);
    for _ in 0..h {
        let sum = a.saturating_add(c);
        let next_a = sum.checked_pow(b as u32).unwrap_or(u128::MAX);
        let next_c = a.checked_pow(b as u32).unwrap_or(u128::MAX);
        a = next_a;
        c = next_c;
    }
    a.saturating_add(c)
}

/// Number of independent sets compatible with `boundary`, as a float.
pub fn state_count(shape: &TreeShape, boundary: &BoundaryCondition) -> f64 {
    // (count with v empty, count with v occupied), bottom-up.
    let mut empty = vec![0.0f64; shape.n()];
    let mut occ = vec![0.0f64; shape.n()];
    for v in (0..shape.n()).rev() {
        if shape.is_leaf(v) {
            match boundary.fixed(shape, v) {
                Some(true) => occ[v] = 1.0,
                Some(false) => empty[v] = 1.0,
                None => {
                    empty[v] = 1.0;
                    occ[v] = 1.0;
                }
            }
        } else {
            let (mut e, mut o) = (1.0, 1.0);
            for w in shape.children(v) {
                e *= empty[w] + occ[w];
                o *= empty[w];
            }
            empty[v] = e;
            occ[v] = o;
        }
    }
    empty[0] + occ[0]
}

/// Calls `visit` on every independent set compatible with `boundary`, in
/// lexicographic order of the level-order bit string (vertex 0 first,
/// unoccupied before occupied).
pub fn for_each_state<F: FnMut(&Configuration)>(
    shape: &TreeShape,
    boundary: &BoundaryCondition,
    mut visit: F,
) {
    let n = shape.n();
    // can_take[v][s]: spin s allowed at v regardless of the parent.
    let mut can_take = vec![[true, true]; n];
    for v in 0..n {
        if let Some(spin) = boundary.fixed(shape, v) {
            can_take[v] = [!spin, spin];
        }
    }
    // Trimming: a parent of an occupied boundary leaf is never occupied.
    for v in 0..n {
        if shape.children(v).any(|w| boundary.fixed(shape, w) == Some(true)) {
            can_take[v][1] = false;
        }
    }
    fn rec<F: FnMut(&Configuration)>(
        v: usize,
        shape: &TreeShape,
        can_take: &[[bool; 2]],
        cur: &mut Configuration,
        visit: &mut F,
    ) {
        if v == shape.n() {
            visit(cur);
            return;
        }
        let parent_occ = shape.parent(v).is_some_and(|p| cur.get(p));
        if can_take[v][0] {
            rec(v + 1, shape, can_take, cur, visit);
        }
        if can_take[v][1] && !parent_occ {
            cur.set(v, true);
            rec(v + 1, shape, can_take, cur, visit);
            cur.set(v, false);
        }
    }
    let mut cur = Configuration::zeros(n);
    rec(0, shape, &can_take, &mut cur, &mut visit);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_counts_and_navigation() {
        let s = TreeShape::new(3, 2).unwrap();
        assert_eq!(s.n(), 13);
        assert_eq!(s.leaves(), 4..13);
        assert_eq!(s.children(0), 1..4);
        assert_eq!(s.children(2), 7..10);
        assert_eq!(s.parent(8), Some(2));
        assert_eq!(s.depth(12), 2);
        assert_eq!(s.level(1), 1..4);
        assert_eq!(s.path_to_root(11), vec![11, 3, 0]);
        let single = TreeShape::new(5, 0).unwrap();
        assert_eq!(single.n(), 1);
        assert!(single.is_leaf(0));
    }

    #[test]
    fn shape_rejects_overflow() {
        assert!(TreeShape::new(MAX_BRANCHING, 5).is_err());
        assert!(TreeShape::new(2, 61).is_err());
        assert!(TreeShape::new(0, 1).is_err());
        assert!(TreeShape::new(2, 60).is_ok());
        assert!(TreeShape::new(3, 60).is_err());
        assert!(TreeShape::new(2, 40).is_ok());
    }

    #[test]
    fn solve_omega_examples() {
        assert!((solve_omega(4.0, 2).unwrap() - 1.0).abs() < 1e-14);
        let w = solve_omega(4.0, 1).unwrap();
        assert!((w - (-1.0 + 17f64.sqrt()) / 2.0).abs() < 1e-13);
        let w = solve_omega(1e-9, 2).unwrap();
        assert!((w - 1e-9).abs() < 1e-17);
        assert!(w * (1.0 + w).powi(2) - 1e-9 <= 1e-12);
        assert!(matches!(solve_omega(0.0, 2), Err(Error::Domain(_))));
        assert!(matches!(solve_omega(-1.0, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn omega_for_delta_examples() {
        assert!((omega_for_delta(1.0, 2).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((omega_for_delta(0.0, 7).unwrap() - 0.277987164).abs() < 1e-8);
        assert!((omega_for_delta(-0.5, 4).unwrap() - 0.173286795).abs() < 1e-8);
        assert!(omega_for_delta(1.0, 1).is_err());
    }

    #[test]
    fn uniqueness_threshold_values() {
        assert_eq!(uniqueness_threshold(2).unwrap(), 4.0);
        assert_eq!(uniqueness_threshold(3).unwrap(), 1.6875);
        assert!((uniqueness_threshold(4).unwrap() - 256.0 / 243.0).abs() < 1e-15);
        let big = uniqueness_threshold(1000).unwrap();
        assert!((big - std::f64::consts::E / 1000.0).abs() < 1e-5);
    }

    #[test]
    fn validate_cases() {
        let s = TreeShape::new(2, 1).unwrap();
        let free = BoundaryCondition::free(&s);
        assert!(validate(&Configuration::zeros(3), &s, &free).unwrap());
        assert!(!validate(&Configuration::from_ones(3, &[0, 1]), &s, &free).unwrap());
        let bd = BoundaryCondition::explicit(&s, BitPattern::from_ones(2, &[0])).unwrap();
        assert!(!validate(&Configuration::zeros(3), &s, &bd).unwrap());
        assert!(validate(&Configuration::from_ones(3, &[1]), &s, &bd).unwrap());
        assert!(matches!(
            validate(&Configuration::zeros(4), &s, &free),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn hex_layout_is_msb_first() {
        let p = BitPattern::from_ones(5, &[0]);
        assert_eq!(p.to_hex(), "10");
        let p = BitPattern::from_ones(8, &[0, 7]);
        assert_eq!(p.to_hex(), "81");
        assert_eq!(BitPattern::from_hex(8, "81").unwrap(), p);
        assert!(BitPattern::from_hex(5, "20").is_err());
        assert!(BitPattern::from_hex(8, "8").is_err());
    }

    #[test]
    fn boundary_json_round_trip() {
        let s = TreeShape::new(2, 3).unwrap();
        let bd = BoundaryCondition::with_kind(&s, BitPattern::from_ones(8, &[2, 5]), BoundaryKind::Lower)
            .unwrap();
        let text = serde_json::to_string(&bd.to_json()).unwrap();
        assert_eq!(text, r#"{"b":2,"h":3,"kind":"L","leaf_bits":"24"}"#);
        let back: BoundaryJson = serde_json::from_str(&text).unwrap();
        assert_eq!(BoundaryCondition::from_json(&back).unwrap(), bd);
        let free = BoundaryCondition::free(&s);
        assert_eq!(BoundaryCondition::from_json(&free.to_json()).unwrap(), free);
    }

    #[test]
    fn enumeration_respects_boundary() {
        let s = TreeShape::new(2, 1).unwrap();
        let mut count = 0;
        for_each_state(&s, &BoundaryCondition::free(&s), |_| count += 1);
        assert_eq!(count, 5);
        let both = BoundaryCondition::explicit(&s, BitPattern::from_ones(2, &[0, 1])).unwrap();
        let mut seen = Vec::new();
        for_each_state(&s, &both, |c| seen.push(c.clone()));
        assert_eq!(seen, vec![Configuration::from_ones(3, &[1, 2])]);
        assert_eq!(state_count(&s, &both), 1.0);
    }
}
