//! Recursive boundary conditions whose root marginal stays pinned near the
//! broadcast value: the Q-value recursion, its materialization as leaf
//! patterns, and the reconstruction quantities under these boundaries.
//!
//! For a tree `T` with boundary, `Q(T) = mu(r = 1) / (omega mu(r = 0))`. A
//! vertex of the trimmed tree with `l` children of value `Q_U` and `b - l` of
//! value `Q_L` has
//! `Q' = (1+omega)^b / ((1 + omega Q_U)^l (1 + omega Q_L)^(b-l))`.
//! Values are tracked through `eps_plus = Q_U - 1` and `eps_minus = 1 - Q_L`,
//! which avoids cancellation once both are tiny.

use std::io::Write;

use crate::error::{Error, Result};
use crate::exact_gibbs::{StreamingRootDp, WeightScheme};
use crate::model::{lambda_from_omega, BitPattern, BoundaryCondition, BoundaryKind, TreeShape};
use crate::numfmt::fmt_f64;
use crate::reconstruction::JointRootStats;

/// One level of the construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QState {
    pub level: usize,
    /// Number of upper children of an upper vertex at this level.
    pub t: u64,
    /// Number of upper children of a lower vertex at this level.
    pub s: u64,
    pub eps_plus: f64,
    pub eps_minus: f64,
}

impl QState {
    pub fn q_upper(&self) -> f64 {
        1.0 + self.eps_plus
    }

    pub fn q_lower(&self) -> f64 {
        1.0 - self.eps_minus
    }

    pub fn eps_sum(&self) -> f64 {
        self.eps_plus + self.eps_minus
    }
}

/// Levels `1..=height` of the construction for one `(b, omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QSequence {
    pub b: u64,
    pub omega: f64,
    levels: Vec<QState>,
}

impl QSequence {
    pub fn height(&self) -> usize {
        self.levels.len()
    }

    /// State at `level`, `1 <= level <= height`.
    pub fn level(&self, level: usize) -> &QState {
        &self.levels[level - 1]
    }

    pub fn levels(&self) -> &[QState] {
        &self.levels
    }

    pub fn lambda(&self) -> f64 {
        lambda_from_omega(self.omega, self.b as f64)
    }

    /// Root unoccupation probability `1 / (1 + omega Q)` under the upper or
    /// lower boundary of height `level`.
    pub fn root_empty_prob(&self, level: usize, kind: BoundaryKind) -> f64 {
        let st = self.level(level);
        let q = match kind {
            BoundaryKind::Lower => st.q_lower(),
            _ => st.q_upper(),
        };
        1.0 / (1.0 + self.omega * q)
    }

    /// A sequence sitting at the fixed point `Q_U = Q_L = 1` on every level.
    pub fn fixed_point(b: u64, omega: f64, height: usize) -> Self {
        let levels = (1..=height)
            .map(|level| QState { level, t: 0, s: 0, eps_plus: 0.0, eps_minus: 0.0 })
            .collect();
        Self { b, omega, levels }
    }

    /// `(eps_sum(i+1) / eps_sum(i))` for every consecutive pair, with `0/0 = 0`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].eps_sum(), w[1].eps_sum());
                if a == 0.0 {
                    0.0
                } else {
                    b / a
                }
            })
            .collect()
    }

    /// CSV with columns `i, Q_U, Q_L, t, s, eps_plus, eps_minus, ratio`;
    /// `ratio` is the contraction ratio into the level (empty on level 1).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["i", "Q_U", "Q_L", "t", "s", "eps_plus", "eps_minus", "ratio"])
            .map_err(io)?;
        let ratios = self.contraction_ratios();
        for (k, st) in self.levels.iter().enumerate() {
            let ratio = if k == 0 { String::new() } else { fmt_f64(ratios[k - 1]) };
            w.write_record([
                st.level.to_string(),
                fmt_f64(st.q_upper()),
                fmt_f64(st.q_lower()),
                st.t.to_string(),
                st.s.to_string(),
                fmt_f64(st.eps_plus),
                fmt_f64(st.eps_minus),
                ratio,
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Runs the recursion from `Q(U_1) = lambda/omega`, `Q(L_1) = 0`.
///
/// At each level `t` is the child count giving the smallest `Q' >= 1` and
/// `s` the count giving the largest `Q' <= 1`; when some count gives exactly
/// 1, both equal the smallest such count.
pub fn construct_q_sequence(b: u64, omega: f64, height: usize) -> Result<QSequence> {
    if b < 2 {
        return Err(Error::Domain(format!("branching factor must be at least 2, got {b}")));
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    if height == 0 {
        return Err(Error::Domain("height must be at least 1".into()));
    }
    let bf = b as f64;
    let c = omega / (1.0 + omega);
    let mut levels = Vec::with_capacity(height);
    // U_1 has all leaves unoccupied (no upper children); L_1 has one
    // occupied leaf, which acts as an upper child of infinite Q.
    let mut state = QState {
        level: 1,
        t: 0,
        s: 1,
        eps_plus: (bf * omega.ln_1p()).exp_m1(),
        eps_minus: 1.0,
    };
    levels.push(state);
    for level in 2..=height {
        let a = (c * state.eps_plus).ln_1p();
        let bneg = (-c * state.eps_minus).ln_1p();
        // ln(1/Q'(l)) = l a + (b - l) bneg, non-decreasing in l.
        let log_inv = |l: u64| l as f64 * a + (b - l) as f64 * bneg;
        let (t, s) = select_counts(b, a, bneg, &log_inv)?;
        let eps_plus = (-log_inv(t)).exp_m1();
        let eps_minus = -(-log_inv(s)).exp_m1();
        if !(eps_plus >= 0.0) || !(0.0..=1.0).contains(&eps_minus) {
            return Err(Error::Consistency(format!(
                "level {level}: Q values left their ranges ({eps_plus}, {eps_minus})"
            )));
        }
        state = QState { level, t, s, eps_plus, eps_minus };
        levels.push(state);
    }
    Ok(QSequence { b, omega, levels })
}

fn select_counts(b: u64, a: f64, bneg: f64, log_inv: &dyn Fn(u64) -> f64) -> Result<(u64, u64)> {
    if log_inv(0) > 0.0 || log_inv(b) < 0.0 {
        return Err(Error::Consistency("no child count brackets Q' = 1".into()));
    }
    // Real root of the linear function, then a local integer search.
    let guess = if a > bneg { (-(b as f64) * bneg / (a - bneg)).floor() } else { 0.0 };
    let guess = guess.clamp(0.0, b as f64) as u64;
    let lo = guess.saturating_sub(2);
    let hi = (guess + 2).min(b);
    if let Some(l) = (lo..=hi).find(|&l| log_inv(l) == 0.0) {
        // Smallest exact solution; the function is monotone so scan down.
        let mut l0 = l;
        while l0 > 0 && log_inv(l0 - 1) == 0.0 {
            l0 -= 1;
        }
        return Ok((l0, l0));
    }
    let mut t = lo;
    while t < hi && log_inv(t + 1) < 0.0 {
        t += 1;
    }
    if log_inv(t) > 0.0 || (t < b && log_inv(t + 1) < 0.0) {
        return Err(Error::Consistency("child count search left its bracket".into()));
    }
    Ok((t, t + 1))
}

/// Worst level-to-level contraction of `eps_plus + eps_minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub worst_ratio: f64,
    /// Level whose sum is compared with the previous one.
    pub worst_level: usize,
    pub holds: bool,
}

pub fn verify_contraction(qseq: &QSequence) -> Result<ContractionReport> {
    if !(qseq.omega < 1.0) {
        return Err(Error::Domain(format!(
            "contraction is only asserted for omega < 1, got {}",
            qseq.omega
        )));
    }
    let mut worst = (0.0, 1usize);
    for (k, &r) in qseq.contraction_ratios().iter().enumerate() {
        if r > worst.0 {
            worst = (r, k + 2);
        }
    }
    Ok(ContractionReport {
        worst_ratio: worst.0,
        worst_level: worst.1,
        holds: worst.0 <= qseq.omega + 1e-12,
    })
}

/// Composition of an upper or lower boundary: an upper vertex at level `i`
/// has `t_i` upper and `b - t_i` lower children, a lower vertex `s_i` and
/// `b - s_i`. Level 0 upper is an occupied leaf, level 0 lower an unoccupied
/// one. Upper children come first.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveBoundary {
    b: usize,
    height: usize,
    kind: BoundaryKind,
    t: Vec<usize>,
    s: Vec<usize>,
}

impl RecursiveBoundary {
    pub fn new(qseq: &QSequence, height: usize, kind: BoundaryKind) -> Result<Self> {
        if !matches!(kind, BoundaryKind::Upper | BoundaryKind::Lower) {
            return Err(Error::Domain("recursive boundaries are upper or lower".into()));
        }
        if height == 0 || height > qseq.height() {
            return Err(Error::Domain(format!(
                "height {height} outside 1..={} of the sequence",
                qseq.height()
            )));
        }
        let b = usize::try_from(qseq.b).map_err(|_| Error::Domain("b too large".into()))?;
        let mut t = vec![0usize];
        let mut s = vec![0usize];
        for st in &qseq.levels()[..height] {
            t.push(st.t as usize);
            s.push(st.s as usize);
        }
        Ok(Self { b, height, kind, t, s })
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    fn upper_children(&self, kind: BoundaryKind, level: usize) -> usize {
        match kind {
            BoundaryKind::Upper => self.t[level],
            _ => self.s[level],
        }
    }

    /// Calls `f` with the leaf spins of each height-1 block, left to right.
    pub fn for_each_block<F: FnMut(&[bool])>(&self, mut f: F) {
        let b = self.b;
        let upper_block = vec![false; b];
        let mut lower_block = vec![false; b];
        for bit in lower_block.iter_mut().take(self.s[1]) {
            *bit = true;
        }
        let upper_block: Vec<bool> = {
            let mut u = upper_block;
            for bit in u.iter_mut().take(self.t[1]) {
                *bit = true;
            }
            u
        };
        fn rec<F: FnMut(&[bool])>(
            rb: &RecursiveBoundary,
            kind: BoundaryKind,
            level: usize,
            ub: &[bool],
            lb: &[bool],
            f: &mut F,
        ) {
            if level == 1 {
                f(if kind == BoundaryKind::Upper { ub } else { lb });
                return;
            }
            let k = rb.upper_children(kind, level);
            for j in 0..rb.b {
                let child = if j < k { BoundaryKind::Upper } else { BoundaryKind::Lower };
                rec(rb, child, level - 1, ub, lb, f);
            }
        }
        rec(self, self.kind, self.height, &upper_block, &lower_block, &mut f);
    }

    /// Leaf bit pattern on the tree of height `self.height`.
    pub fn leaf_bits(&self) -> Result<BitPattern> {
        let shape = TreeShape::new(self.b, self.height)?;
        let mut bits = BitPattern::zeros(shape.num_leaves());
        let mut pos = 0usize;
        self.for_each_block(|block| {
            for (k, &x) in block.iter().enumerate() {
                if x {
                    bits.set(pos + k, true);
                }
            }
            pos += block.len();
        });
        Ok(bits)
    }

    /// Canonical form of the trimmed tree described by the composition.
    pub fn canonical(&self) -> String {
        fn rec(rb: &RecursiveBoundary, kind: BoundaryKind, level: usize) -> String {
            if level == 0 {
                // Leaves are always deleted.
                return String::new();
            }
            let k = rb.upper_children(kind, level);
            if level == 1 && k > 0 {
                // Parent of an occupied leaf.
                return String::new();
            }
            let mut children: Vec<String> = (0..rb.b)
                .map(|j| {
                    let child = if j < k { BoundaryKind::Upper } else { BoundaryKind::Lower };
                    rec(rb, child, level - 1)
                })
                .filter(|c| !c.is_empty())
                .collect();
            children.sort();
            format!("({})", children.concat())
        }
        rec(self, self.kind, self.height)
    }
}

/// Leaf pattern of `rb` as a boundary condition on `shape`.
pub fn materialize(rb: &RecursiveBoundary, shape: &TreeShape) -> Result<BoundaryCondition> {
    if shape.h() != rb.height || shape.b() != rb.b {
        return Err(Error::Structural(format!(
            "boundary of b={}, height {} does not fit tree b={}, h={}",
            rb.b,
            rb.height,
            shape.b(),
            shape.h()
        )));
    }
    BoundaryCondition::with_kind(shape, rb.leaf_bits()?, rb.kind)
}

/// Canonical form of the tree obtained from `shape` by deleting all leaves
/// and every parent of an occupied leaf.
pub fn trimmed_canonical(boundary: &BoundaryCondition, shape: &TreeShape) -> Result<String> {
    boundary.check_shape(shape)?;
    let bits = boundary
        .leaf_bits()
        .ok_or_else(|| Error::Domain("free boundary has no trimmed tree".into()))?;
    let first = shape.first_leaf();
    fn rec(v: usize, shape: &TreeShape, bits: &BitPattern, first: usize) -> String {
        if shape.is_leaf(v) {
            return String::new();
        }
        if shape.children(v).any(|w| shape.is_leaf(w) && bits.get(w - first)) {
            return String::new();
        }
        let mut children: Vec<String> = shape
            .children(v)
            .map(|w| rec(w, shape, bits, first))
            .filter(|c| !c.is_empty())
            .collect();
        children.sort();
        format!("({})", children.concat())
    }
    Ok(rec(0, shape, bits, first))
}

/// Exact `Q` at the root of the materialized boundary, by streaming its
/// leaves through the bottom-up ratio recursion with activity `lambda`.
pub fn materialized_root_q(rb: &RecursiveBoundary, omega: f64) -> Result<f64> {
    let lambda = lambda_from_omega(omega, rb.b as f64);
    let mut dp = StreamingRootDp::ratio_only(rb.b, rb.height, WeightScheme::uniform(lambda));
    rb.for_each_block(|block| dp.push_block(block));
    let (ratio, _) = dp.finish()?;
    Ok(ratio / omega)
}

/// Largest `|mu(r = 0) - 1/(1+omega)|` over the two boundaries at `level`.
pub fn marginal_error(qseq: &QSequence, level: usize) -> f64 {
    let target = 1.0 / (1.0 + qseq.omega);
    [BoundaryKind::Upper, BoundaryKind::Lower]
        .iter()
        .map(|&k| (qseq.root_empty_prob(level, k) - target).abs())
        .fold(0.0, f64::max)
}

/// `omega^(i-1) lambda / b`, the per-level marginal error bound under test.
pub fn marginal_error_bound(qseq: &QSequence, level: usize) -> f64 {
    qseq.omega.powi(level as i32 - 1) * qseq.lambda() / qseq.b as f64
}

/// Result of the search for the level from which the lower boundary's root
/// marginal stays within the slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpLevel {
    pub level: usize,
    /// True when the tail beyond the scanned range is covered by the
    /// contraction of the error sum (`omega < 1`); false for scan-only runs.
    pub certified: bool,
}

/// Default scan horizon for `hp_level`.
pub const HP_HORIZON: usize = 10_000;

/// Minimal `l` such that `mu_{L_i}(r = 0) <= exp(1.01 (omega b)^2 / lambda) / (1+omega)`
/// for every `i >= l`.
pub fn hp_level(lambda: f64, b: u64) -> Result<HpLevel> {
    let omega = crate::model::solve_omega(lambda, b)?;
    let slack = (1.01 * (omega * b as f64).powi(2) / lambda).exp();
    hp_level_with_slack(omega, b, slack, HP_HORIZON)
}

/// `hp_level` with an explicit slack factor and scan horizon.
pub fn hp_level_with_slack(omega: f64, b: u64, slack: f64, horizon: usize) -> Result<HpLevel> {
    let rhs = slack / (1.0 + omega);
    if rhs >= 1.0 {
        return Ok(HpLevel { level: 1, certified: true });
    }
    let qseq = construct_q_sequence(b, omega, horizon)?;
    let ok = |i: usize| qseq.root_empty_prob(i, BoundaryKind::Lower) <= rhs;
    let contracting = omega < 1.0;
    if contracting {
        // Every later lower marginal is at most 1/(1 + omega - omega S_j),
        // since eps_minus_i <= S_i <= S_j for i >= j.
        let ratios = qseq.contraction_ratios();
        for j in 1..=horizon {
            if j >= 2 && ratios[j - 2] > omega + 1e-12 {
                break;
            }
            let sum = qseq.level(j).eps_sum();
            let tail = 1.0 / (1.0 + omega - omega * sum.min(1.0));
            if tail <= rhs {
                let mut level = j;
                while level > 1 && ok(level - 1) {
                    level -= 1;
                }
                return Ok(HpLevel { level, certified: true });
            }
        }
    }
    if !ok(horizon) {
        return Err(Error::Budget(format!(
            "lower-boundary marginal still above the slack at level {horizon}"
        )));
    }
    let mut level = horizon;
    while level > 1 && ok(level - 1) {
        level -= 1;
    }
    Ok(HpLevel { level, certified: false })
}

/// Per-level statistics of the labeling run from distance `ell_hat` under the
/// upper and lower boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGhat {
    pub ell_hat: usize,
    /// `P(A = 0)` under `U_i` for `i = ell_hat..=h`.
    pub upper: Vec<f64>,
    /// `P(A = 0)` under `L_i` for `i = ell_hat..=h`.
    pub lower: Vec<f64>,
    pub joint_upper: JointRootStats,
    pub joint_lower: JointRootStats,
    /// `1.01^(1/b) / (1+omega)`.
    pub bound: f64,
    /// Levels where either series exceeds `bound`.
    pub violations: Vec<usize>,
}

impl BoundaryGhat {
    pub fn upper_at(&self, i: usize) -> f64 {
        self.upper[i - self.ell_hat]
    }

    pub fn lower_at(&self, i: usize) -> f64 {
        self.lower[i - self.ell_hat]
    }
}

/// Coupled recurrences for `P(A = 0)` under `U_i` and `L_i`, with the
/// algorithm reading the spins at distance `ell_hat` from the leaves and the
/// root marginals taken from the Q-values.
pub fn ghat_with_boundary(h: usize, qseq: &QSequence, ell_hat: usize) -> Result<BoundaryGhat> {
    if ell_hat == 0 || ell_hat > h || h > qseq.height() {
        return Err(Error::Domain(format!(
            "need 1 <= ell_hat={ell_hat} <= h={h} <= {}",
            qseq.height()
        )));
    }
    let bf = qseq.b as f64;
    let len = h - ell_hat + 1;
    // Per boundary kind: P(A=0), P(root label 1 | root empty),
    // P(root label 1 | root occupied).
    let mut g: [Vec<f64>; 2] = [vec![0.0; len], vec![0.0; len]];
    let mut c1: [Vec<f64>; 2] = [vec![0.0; len], vec![0.0; len]];
    let mut a1: [Vec<f64>; 2] = [vec![0.0; len], vec![0.0; len]];
    let kinds = [BoundaryKind::Upper, BoundaryKind::Lower];
    for k in 0..len {
        let level = ell_hat + k;
        let st = qseq.level(level);
        for (x, &kind) in kinds.iter().enumerate() {
            let mu0 = qseq.root_empty_prob(level, kind);
            if k == 0 {
                c1[x][k] = 0.0;
                a1[x][k] = 1.0;
            } else {
                let up = match kind {
                    BoundaryKind::Upper => st.t as f64,
                    _ => st.s as f64,
                };
                let low = bf - up;
                c1[x][k] = g[0][k - 1].powf(up) * g[1][k - 1].powf(low);
                a1[x][k] = (1.0 - c1[0][k - 1]).powf(up) * (1.0 - c1[1][k - 1]).powf(low);
            }
            g[x][k] = mu0 * (1.0 - c1[x][k]) + (1.0 - mu0) * (1.0 - a1[x][k]);
        }
    }
    let joint = |x: usize| {
        let mu0 = qseq.root_empty_prob(h, kinds[x]);
        let (c, a) = (c1[x][len - 1], a1[x][len - 1]);
        JointRootStats::from_joint([[mu0 * (1.0 - c), mu0 * c], [(1.0 - mu0) * (1.0 - a), (1.0 - mu0) * a]])
    };
    let bound = 1.01f64.powf(1.0 / bf) / (1.0 + qseq.omega);
    let violations = (0..len)
        .filter(|&k| g[0][k] > bound || g[1][k] > bound)
        .map(|k| ell_hat + k)
        .collect();
    let [upper, lower] = g;
    Ok(BoundaryGhat {
        ell_hat,
        upper,
        lower,
        joint_upper: joint(0),
        joint_lower: joint(1),
        bound,
        violations,
    })
}

/// Effectiveness of the labeling from distance `ell_hat` under the upper and
/// lower boundaries of height `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEffectiveness {
    pub r_upper: f64,
    pub r_lower: f64,
    /// `1 - 1.01/(1+omega)^b - 1.01^(1/b)/(1+omega)`.
    pub lower_bound_expr: f64,
}

pub fn effectiveness_with_boundary(
    h: usize,
    qseq: &QSequence,
    ell_hat: usize,
) -> Result<BoundaryEffectiveness> {
    let gh = ghat_with_boundary(h, qseq, ell_hat)?;
    let bf = qseq.b as f64;
    let w = qseq.omega;
    Ok(BoundaryEffectiveness {
        r_upper: gh.joint_upper.r_eff,
        r_lower: gh.joint_lower.r_eff,
        lower_bound_expr: 1.0 - 1.01 / (1.0 + w).powf(bf) - 1.01f64.powf(1.0 / bf) / (1.0 + w),
    })
}

/// Exponent prediction under the recursive boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerExponentReport {
    pub d: f64,
    pub residual: f64,
    pub hp_level: Option<HpLevel>,
    /// Growth rate `(1.01 omega e^k / (2 lambda)) (1 + sqrt(1 + 4 lambda / (1.01 e^k)))`
    /// with `k = 1.01 (omega b)^2 / lambda`.
    pub inhom_rate: f64,
    /// `1.01 omega / sqrt(lambda)`, which dominates `inhom_rate`.
    pub dominating_rate: f64,
}

pub fn predicted_lower_exponent(b: u64, delta: f64) -> Result<LowerExponentReport> {
    let omega = crate::model::omega_for_delta(delta, b)?;
    let exp = crate::asymptotics::exponent_d(b as f64, delta)?;
    let bf = b as f64;
    let lambda = lambda_from_omega(omega, bf);
    let kappa = 1.01 * (omega * bf).powi(2) / lambda;
    let ek = kappa.exp();
    let inhom_rate = 1.01 * omega * ek / (2.0 * lambda) * (1.0 + (1.0 + 4.0 * lambda / (1.01 * ek)).sqrt());
    let hp = if omega < 1.0 {
        let slack = kappa.exp();
        hp_level_with_slack(omega, b, slack, HP_HORIZON).ok()
    } else {
        None
    };
    Ok(LowerExponentReport {
        d: exp.d,
        residual: exp.residual,
        hp_level: hp,
        inhom_rate,
        dominating_rate: 1.01 * omega / lambda.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_levels() {
        let w = 0.3;
        let q = construct_q_sequence(3, w, 5).unwrap();
        let lambda = lambda_from_omega(w, 3.0);
        assert!((q.level(1).q_upper() - lambda / w).abs() < 1e-12);
        assert_eq!(q.level(1).q_lower(), 0.0);
        for st in q.levels() {
            assert!(st.s == st.t || st.s == st.t + 1);
            assert!(st.q_upper() >= 1.0 && st.q_lower() <= 1.0);
        }
    }

    #[test]
    fn fixed_point_selects_zero() {
        let b = 4u64;
        let (t, s) = select_counts(b, 0.0, 0.0, &|_| 0.0).unwrap();
        assert_eq!((t, s), (0, 0));
    }

    #[test]
    fn level_two_counts_by_hand() {
        // b=2, omega=1: Q(U_1)=4, Q(L_1)=0. Q'(l) = 4 / (5^l 1^(2-l)):
        // l=0 -> 4, l=1 -> 0.8, so t=0 and s=1.
        let q = construct_q_sequence(2, 1.0, 2).unwrap();
        let st = q.level(2);
        assert_eq!((st.t, st.s), (0, 1));
        assert!((st.q_upper() - 4.0).abs() < 1e-12);
        assert!((st.q_lower() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn materialized_base_cases() {
        let q = construct_q_sequence(3, 0.5, 3).unwrap();
        let s1 = TreeShape::new(3, 1).unwrap();
        let u1 = materialize(&RecursiveBoundary::new(&q, 1, BoundaryKind::Upper).unwrap(), &s1).unwrap();
        assert_eq!(u1.leaf_bits().unwrap().count_ones(), 0);
        let l1 = materialize(&RecursiveBoundary::new(&q, 1, BoundaryKind::Lower).unwrap(), &s1).unwrap();
        assert_eq!(l1.leaf_bits().unwrap().ones().collect::<Vec<_>>(), vec![0]);
        assert_eq!(trimmed_canonical(&u1, &s1).unwrap(), "()");
        assert_eq!(trimmed_canonical(&l1, &s1).unwrap(), "");
        let s2 = TreeShape::new(3, 2).unwrap();
        assert!(materialize(&RecursiveBoundary::new(&q, 1, BoundaryKind::Upper).unwrap(), &s2).is_err());
    }

    #[test]
    fn materialized_q_matches_recursion() {
        let w = 0.4;
        let q = construct_q_sequence(3, w, 6).unwrap();
        for level in 1..=6 {
            for kind in [BoundaryKind::Upper, BoundaryKind::Lower] {
                let rb = RecursiveBoundary::new(&q, level, kind).unwrap();
                let exact = materialized_root_q(&rb, w).unwrap();
                let st = q.level(level);
                let want = if kind == BoundaryKind::Upper { st.q_upper() } else { st.q_lower() };
                assert!((exact - want).abs() <= 1e-12 * want.max(1.0), "{level} {kind}: {exact} {want}");
            }
        }
    }

    #[test]
    fn contraction_needs_small_omega() {
        let q = construct_q_sequence(2, 1.5, 5).unwrap();
        assert!(matches!(verify_contraction(&q), Err(Error::Domain(_))));
    }

    #[test]
    fn hp_level_trivial_when_slack_is_large() {
        let hp = hp_level_with_slack(0.5, 3, 2.0, 100).unwrap();
        assert_eq!(hp, HpLevel { level: 1, certified: true });
    }

    #[test]
    fn csv_header() {
        let q = construct_q_sequence(2, 0.5, 3).unwrap();
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("i,Q_U,Q_L,t,s,eps_plus,eps_minus,ratio\n1,"));
        assert_eq!(text.lines().count(), 4);
    }
}
