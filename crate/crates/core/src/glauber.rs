//! Single-site heat-bath dynamics: trajectories, explicit transition
//! matrices, spectral gap, conductance and mixing-time estimates.
//!
//! Under an explicit boundary the leaves are frozen and the updated vertex is
//! chosen uniformly among the free vertices only. One step of this chain is
//! `n_free / n` of a step of the chain that also picks frozen vertices (and
//! then does nothing), so relaxation times convert by that factor.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact_gibbs::{check_capacity, normalize_log_weights, WeightScheme};
use crate::model::{for_each_state, validate, BoundaryCondition, Configuration, TreeShape};

/// Largest state space a chain matrix is built for.
/// Largest state space for which the transition matrix is built; about
/// 0.5 kB per state once rows and the index are stored.
pub const CHAIN_LIMIT: f64 = 2e6;
/// Below this size `SpectralMethod::Auto` also runs the dense solver and
/// cross-checks.
pub const DENSE_LIMIT: usize = 2000;

/// Heat-bath update rule for one tree: which vertices move and with which
/// occupation probability.
#[derive(Debug, Clone)]
pub struct HeatBath {
    shape: TreeShape,
    free: Vec<usize>,
    probs: Vec<f64>,
}

impl HeatBath {
    /// `probs[v]` is the probability of occupying `v` when no neighbor is
    /// occupied.
    pub fn new(shape: &TreeShape, boundary: &BoundaryCondition, probs: Vec<f64>) -> Result<Self> {
        boundary.check_shape(shape)?;
        if probs.len() != shape.n() {
            return Err(Error::Structural(format!(
                "{} occupation probabilities for {} vertices",
                probs.len(),
                shape.n()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("occupation probability {p} outside [0, 1]")));
        }
        Ok(Self { shape: *shape, free: boundary.free_vertices(shape), probs })
    }

    pub fn from_scheme(
        shape: &TreeShape,
        boundary: &BoundaryCondition,
        scheme: &WeightScheme,
    ) -> Result<Self> {
        Self::new(shape, boundary, scheme.occupation_probs(shape))
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Time factor `n_free / n` between this chain and the chain that also
    /// selects frozen vertices.
    pub fn time_factor(&self) -> f64 {
        self.free.len() as f64 / self.shape.n() as f64
    }

    #[inline]
    pub fn blocked(&self, config: &Configuration, v: usize) -> bool {
        self.shape.parent(v).is_some_and(|p| config.get(p))
            || self.shape.children(v).any(|w| config.get(w))
    }

    /// Probability that `v` is occupied after being updated in `config`.
    #[inline]
    pub fn update_prob(&self, config: &Configuration, v: usize) -> f64 {
        if self.blocked(config, v) {
            0.0
        } else {
            self.probs[v]
        }
    }

    /// Heat-bath update of vertex `v` driven by the uniform variate `u`.
    #[inline]
    pub fn update_with(&self, config: &mut Configuration, v: usize, u: f64) {
        let p = self.update_prob(config, v);
        config.set(v, u < p);
    }

    /// One step in place; does nothing when every vertex is frozen.
    pub fn step<R: Rng + ?Sized>(&self, config: &mut Configuration, rng: &mut R) {
        if self.free.is_empty() {
            return;
        }
        let v = self.free[rng.random_range(0..self.free.len())];
        let u = rng.random::<f64>();
        self.update_with(config, v, u);
    }
}

/// One heat-bath step from `config`, after checking that `config` is a valid
/// state for `boundary`.
pub fn glauber_step<R: Rng + ?Sized>(
    config: &Configuration,
    shape: &TreeShape,
    boundary: &BoundaryCondition,
    scheme: &WeightScheme,
    rng: &mut R,
) -> Result<Configuration> {
    if !validate(config, shape, boundary)? {
        return Err(Error::Structural("configuration is not a valid state".into()));
    }
    let dynamics = HeatBath::from_scheme(shape, boundary, scheme)?;
    let mut next = config.clone();
    dynamics.step(&mut next, rng);
    Ok(next)
}

/// Transition matrix of the heat-bath chain on its stationary support, in
/// compressed sparse rows.
#[derive(Debug, Clone)]
pub struct ChainMatrix {
    pub states: Vec<Configuration>,
    pub pi: Vec<f64>,
    index: HashMap<Configuration, usize>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    n: usize,
    n_free: usize,
}

impl ChainMatrix {
    /// Builds the chain for `dynamics` on the states compatible with
    /// `boundary` that have positive stationary weight.
    pub fn heat_bath(
        dynamics: &HeatBath,
        boundary: &BoundaryCondition,
        limit: f64,
    ) -> Result<Self> {
        let shape = dynamics.shape;
        boundary.check_shape(&shape)?;
        check_capacity(&shape, boundary, limit)?;
        let free = &dynamics.free;
        let mut states = Vec::new();
        let mut logw = Vec::new();
        for_each_state(&shape, boundary, |s| {
            let lw: f64 = free
                .iter()
                .map(|&v| {
                    let p = dynamics.probs[v];
                    if s.get(v) {
                        p.ln()
                    } else {
                        (1.0 - p).ln()
                    }
                })
                .sum();
            if lw > f64::NEG_INFINITY {
                states.push(s.clone());
                logw.push(lw);
            }
        });
        let pi = normalize_log_weights(&logw)?;
        let index: HashMap<Configuration, usize> =
            states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();

        let rate = if free.is_empty() { 0.0 } else { 1.0 / free.len() as f64 };
        let mut row_ptr = Vec::with_capacity(states.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut row: Vec<(u32, f64)> = Vec::with_capacity(free.len() + 1);
        for (i, s) in states.iter().enumerate() {
            row.clear();
            let mut stay = 1.0;
            for &v in free {
                let p = dynamics.update_prob(s, v);
                let move_prob = if s.get(v) { 1.0 - p } else { p };
                if move_prob > 0.0 {
                    let mut t = s.clone();
                    t.flip(v);
                    let j = *index.get(&t).ok_or_else(|| {
                        Error::Consistency("transition leaves the stationary support".into())
                    })?;
                    let w = rate * move_prob;
                    row.push((j as u32, w));
                    stay -= w;
                }
            }
            row.push((i as u32, stay.max(0.0)));
            row.sort_unstable_by_key(|e| e.0);
            for &(j, w) in &row {
                cols.push(j);
                vals.push(w);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            states,
            pi,
            index,
            row_ptr,
            cols,
            vals,
            n: shape.n(),
            n_free: free.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn index_of(&self, config: &Configuration) -> Option<usize> {
        self.index.get(config).copied()
    }

    /// Nonzero entries `(j, P(i, j))` of row `i`, sorted by `j`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().zip(&self.vals[range]).map(|(&j, &w)| (j as usize, w))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), self.len());
        for i in 0..self.len() {
            for (j, w) in self.row(i) {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// Largest deviation of a row sum from 1.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.row(i).map(|(_, w)| w).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|pi(i) P(i,j) - pi(j) P(j,i)|` over all pairs.
    pub fn detailed_balance_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for (j, w) in self.row(i) {
                if j > i {
                    let d = (self.pi[i] * w - self.pi[j] * self.get(j, i)).abs();
                    worst = worst.max(d);
                }
            }
        }
        worst
    }

    /// `mu P` for a row vector `mu`.
    pub fn left_mul(&self, mu: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &m) in mu.iter().enumerate() {
            if m != 0.0 {
                for (j, w) in self.row(i) {
                    out[j] += m * w;
                }
            }
        }
    }

    /// Symmetrized operator `D^{1/2} P D^{-1/2}`; for a reversible chain its
    /// entries are `sqrt(P(i,j) P(j,i))`.
    fn symmetrized(&self) -> SymCsr<'_> {
        let mut vals = Vec::with_capacity(self.vals.len());
        for i in 0..self.len() {
            for (j, w) in self.row(i) {
                vals.push(if i == j { w } else { (w * self.get(j, i)).sqrt() });
            }
        }
        SymCsr { row_ptr: &self.row_ptr, cols: &self.cols, vals }
    }
}

/// Builds the chain for the heat-bath dynamics of `scheme`.
pub fn build_matrix(
    shape: &TreeShape,
    boundary: &BoundaryCondition,
    scheme: &WeightScheme,
) -> Result<ChainMatrix> {
    let dynamics = HeatBath::from_scheme(shape, boundary, scheme)?;
    ChainMatrix::heat_bath(&dynamics, boundary, CHAIN_LIMIT)
}

struct SymCsr<'a> {
    row_ptr: &'a [usize],
    cols: &'a [u32],
    vals: Vec<f64>,
}

impl SymCsr<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = acc;
        }
    }

    fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k] as usize)] = self.vals[k];
            }
        }
        m
    }
}

/// Which end of the spectrum determines the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    SecondLargest,
    Smallest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    /// Lanczos, cross-checked against the dense solver below `DENSE_LIMIT`.
    Auto,
    Lanczos,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub gamma2: f64,
    pub gamma_min: f64,
    pub gap: f64,
    pub t_rel: f64,
    pub binding: Binding,
    /// Residual `||A y - gamma y||` of the returned eigenpairs for the
    /// symmetrized operator (zero for the dense solver).
    pub residual: f64,
    /// `n_free / n` of the chain.
    pub time_factor: f64,
}

const RESIDUAL_TOL: f64 = 1e-10;
const RESIDUAL_MAX: f64 = 1e-8;

pub fn spectral_report(chain: &ChainMatrix) -> Result<SpectralReport> {
    spectral_report_with(chain, SpectralMethod::Auto)
}

pub fn spectral_report_with(chain: &ChainMatrix, method: SpectralMethod) -> Result<SpectralReport> {
    let violation = chain.detailed_balance_violation();
    if violation > 1e-8 {
        return Err(Error::Consistency(format!("detailed balance violated by {violation:.3e}")));
    }
    let time_factor = chain.n_free as f64 / chain.n as f64;
    let size = chain.len();
    if size <= 1 {
        return Ok(SpectralReport {
            gamma2: 0.0,
            gamma_min: 0.0,
            gap: 1.0,
            t_rel: 1.0,
            binding: Binding::SecondLargest,
            residual: 0.0,
            time_factor,
        });
    }
    let sym = chain.symmetrized();
    let top: Vec<f64> = chain.pi.iter().map(|p| p.sqrt()).collect();
    let (gamma2, gamma_min, residual) = match method {
        SpectralMethod::Dense => {
            let (g2, gmin) = dense_extremes(&sym, &top);
            (g2, gmin, 0.0)
        }
        SpectralMethod::Lanczos => lanczos_extremes(&sym, &top)?,
        SpectralMethod::Auto => {
            let (g2, gmin, res) = lanczos_extremes(&sym, &top)?;
            if size <= DENSE_LIMIT {
                let (d2, dmin) = dense_extremes(&sym, &top);
                if (d2 - g2).abs() > 1e-8 || (dmin - gmin).abs() > 1e-8 {
                    return Err(Error::Consistency(format!(
                        "iterative ({g2}, {gmin}) and dense ({d2}, {dmin}) spectra disagree"
                    )));
                }
            }
            (g2, gmin, res)
        }
    };
    let (slem, binding) = if gamma2 >= gamma_min.abs() {
        (gamma2, Binding::SecondLargest)
    } else {
        (gamma_min.abs(), Binding::Smallest)
    };
    let gap = 1.0 - slem;
    if !(gap > 0.0) {
        return Err(Error::Consistency(format!("non-positive spectral gap {gap:.3e}")));
    }
    Ok(SpectralReport {
        gamma2,
        gamma_min,
        gap,
        t_rel: 1.0 / gap,
        binding,
        residual,
        time_factor,
    })
}

/// Extreme eigenvalues of the symmetrized operator with the top eigenvector
/// projected out.
fn dense_extremes(sym: &SymCsr, top: &[f64]) -> (f64, f64) {
    let n = top.len();
    let a = sym.to_dense(n);
    let u = nalgebra::DVector::from_column_slice(top);
    let proj = DMatrix::identity(n, n) - &u * u.transpose();
    let b = &proj * a * &proj;
    let b = (&b + b.transpose()) * 0.5;
    let mut eig: Vec<f64> = b.symmetric_eigenvalues().iter().copied().collect();
    // The projected direction contributes one eigenvalue 0.
    let zero = eig
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .map(|(k, _)| k)
        .unwrap();
    eig.remove(zero);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    (max, min)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>], top: &[f64]) {
    for _ in 0..2 {
        let c = dot(top, w);
        axpy(-c, top, w);
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

/// Lanczos with full reorthogonalization on the complement of `top`,
/// restarted from the extreme Ritz vectors until both residuals are small.
fn lanczos_extremes(sym: &SymCsr, top: &[f64]) -> Result<(f64, f64, f64)> {
    let n = top.len();
    let dim = n - 1;
    // Keep the Krylov basis within about 512 MB; restarts make up for a
    // shorter basis on large chains.
    const BASIS_BYTES: usize = 512 << 20;
    let m = dim.min(120).min((BASIS_BYTES / (8 * n)).max(16));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    let mut aw = vec![0.0; n];
    for _restart in 0..200 {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut q = start.clone();
        orthogonalize(&mut q, &[], top);
        if normalize(&mut q) < 1e-300 {
            q = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            orthogonalize(&mut q, &[], top);
            normalize(&mut q);
        }
        for k in 0..m {
            sym.apply(&q, &mut aw);
            let a = dot(&q, &aw);
            alpha.push(a);
            basis.push(q);
            if k + 1 == m {
                break;
            }
            let mut w = aw.clone();
            orthogonalize(&mut w, &basis, top);
            let mut b = normalize(&mut w);
            if b < 1e-12 {
                // Invariant subspace: continue with a fresh direction.
                w = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
                orthogonalize(&mut w, &basis, top);
                if normalize(&mut w) < 1e-12 {
                    break;
                }
                b = 0.0;
            }
            beta.push(b);
            q = w;
        }
        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = t.symmetric_eigen();
        let (imax, imin) = extreme_indices(eig.eigenvalues.as_slice());
        let ritz = |idx: usize| -> Vec<f64> {
            let mut y = vec![0.0; n];
            for (j, qj) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(j, idx)], qj, &mut y);
            }
            normalize(&mut y);
            y
        };
        let ymax = ritz(imax);
        let ymin = ritz(imin);
        let rmax = residual(sym, &ymax, top);
        let rmin = residual(sym, &ymin, top);
        let res = rmax.0.max(rmin.0);
        if res < best.2 || best.2.is_infinite() {
            best = (rmax.1, rmin.1, res);
        }
        if res <= RESIDUAL_TOL || k == dim {
            return Ok(best_checked(best)?);
        }
        start = ymax.iter().zip(&ymin).map(|(a, b)| a + b).collect();
    }
    best_checked(best)
}

fn best_checked(best: (f64, f64, f64)) -> Result<(f64, f64, f64)> {
    if best.2 > RESIDUAL_MAX {
        return Err(Error::Budget(format!(
            "eigensolver residual {:.3e} above {RESIDUAL_MAX:.0e}",
            best.2
        )));
    }
    Ok(best)
}

fn extreme_indices(values: &[f64]) -> (usize, usize) {
    let mut imax = 0;
    let mut imin = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[imax] {
            imax = i;
        }
        if v < values[imin] {
            imin = i;
        }
    }
    (imax, imin)
}

/// Residual norm and Rayleigh quotient of `y` on the deflated operator.
fn residual(sym: &SymCsr, y: &[f64], top: &[f64]) -> (f64, f64) {
    let mut ay = vec![0.0; y.len()];
    sym.apply(y, &mut ay);
    let c = dot(top, &ay);
    axpy(-c, top, &mut ay);
    let theta = dot(y, &ay);
    axpy(-theta, y, &mut ay);
    (dot(&ay, &ay).sqrt(), theta)
}

/// Conductance `Q(S, S^c) / (pi(S) pi(S^c))` of the states flagged in `in_s`.
pub fn conductance(chain: &ChainMatrix, in_s: &[bool]) -> Result<f64> {
    if in_s.len() != chain.len() {
        return Err(Error::Structural(format!(
            "subset mask has {} entries, chain has {} states",
            in_s.len(),
            chain.len()
        )));
    }
    let size = in_s.iter().filter(|&&x| x).count();
    if size == 0 || size == chain.len() {
        return Err(Error::Domain("conductance needs a proper non-empty subset".into()));
    }
    let mut flow = 0.0;
    let mut mass = 0.0;
    for i in 0..chain.len() {
        if in_s[i] {
            mass += chain.pi[i];
            for (j, w) in chain.row(i) {
                if !in_s[j] {
                    flow += chain.pi[i] * w;
                }
            }
        }
    }
    Ok(flow / (mass * (1.0 - mass)))
}

/// Conductance of the set of states satisfying `pred`.
pub fn conductance_by<F: Fn(&Configuration) -> bool>(chain: &ChainMatrix, pred: F) -> Result<f64> {
    let mask: Vec<bool> = chain.states.iter().map(pred).collect();
    conductance(chain, &mask)
}

/// Indices of the top and bottom states in the monotone order where
/// even-depth occupations count up and odd-depth occupations count down.
pub fn extreme_states(chain: &ChainMatrix, shape: &TreeShape) -> (usize, usize) {
    let even: Vec<bool> = (0..shape.n()).map(|v| shape.depth(v) % 2 == 0).collect();
    let score = |s: &Configuration| -> i64 {
        s.ones().map(|v| if even[v] { 1 } else { -1 }).sum()
    };
    let mut top = 0;
    let mut bottom = 0;
    let mut best = (i64::MIN, i64::MAX);
    for (i, s) in chain.states.iter().enumerate() {
        let sc = score(s);
        if sc > best.0 {
            best.0 = sc;
            top = i;
        }
        if sc < best.1 {
            best.1 = sc;
            bottom = i;
        }
    }
    (top, bottom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingMethod {
    /// Exact distributions by matrix powering.
    Exact,
    /// Root-occupancy agreement of simulated chains from the two extremes;
    /// a heuristic, not a bound.
    HeuristicRootProxy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingEstimate {
    pub steps: u64,
    pub method: MixingMethod,
    /// Distance statistic at `steps` (TV for the exact method).
    pub distance: f64,
    pub time_factor: f64,
}

/// Smallest `t` with `max_x TV(P^t(x, .), pi) <= eps` over the given starts.
pub fn mixing_time_exact(
    chain: &ChainMatrix,
    starts: &[usize],
    eps: f64,
    max_steps: u64,
) -> Result<MixingEstimate> {
    let time_factor = chain.n_free as f64 / chain.n as f64;
    let mut dists: Vec<Vec<f64>> = starts
        .iter()
        .map(|&s| {
            let mut d = vec![0.0; chain.len()];
            d[s] = 1.0;
            d
        })
        .collect();
    let tv = |d: &[f64]| 0.5 * d.iter().zip(&chain.pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let mut scratch = vec![0.0; chain.len()];
    for t in 0..=max_steps {
        let worst = dists.iter().map(|d| tv(d)).fold(0.0, f64::max);
        if worst <= eps {
            return Ok(MixingEstimate {
                steps: t,
                method: MixingMethod::Exact,
                distance: worst,
                time_factor,
            });
        }
        for d in &mut dists {
            chain.left_mul(d, &mut scratch);
            std::mem::swap(d, &mut scratch);
        }
    }
    Err(Error::Budget(format!("no mixing within {max_steps} steps at eps={eps}")))
}

/// Options for `empirical_mixing`.
#[derive(Debug, Clone)]
pub struct MixingOptions {
    pub max_steps: u64,
    /// State-space size up to which the exact method is used.
    pub exact_limit: f64,
}

impl Default for MixingOptions {
    fn default() -> Self {
        Self { max_steps: 1_000_000, exact_limit: 2e5 }
    }
}

/// Mixing-time estimate from the two extreme starts: exact when the state
/// space is enumerable, otherwise the root-occupancy proxy over one
/// simulated pair of chains per seed.
pub fn empirical_mixing(
    shape: &TreeShape,
    boundary: &BoundaryCondition,
    scheme: &WeightScheme,
    eps: f64,
    seeds: &[u64],
    options: &MixingOptions,
) -> Result<MixingEstimate> {
    let dynamics = HeatBath::from_scheme(shape, boundary, scheme)?;
    match ChainMatrix::heat_bath(&dynamics, boundary, options.exact_limit) {
        Ok(chain) => {
            let (top, bottom) = extreme_states(&chain, shape);
            mixing_time_exact(&chain, &[top, bottom], eps, options.max_steps)
        }
        Err(Error::Capacity { .. }) => root_proxy(&dynamics, boundary, eps, seeds, options),
        Err(e) => Err(e),
    }
}

fn greedy_extreme(dynamics: &HeatBath, boundary: &BoundaryCondition, even_up: bool) -> Configuration {
    let shape = dynamics.shape;
    let mut c = Configuration::zeros(shape.n());
    for v in shape.leaves() {
        if boundary.fixed(&shape, v) == Some(true) {
            c.set(v, true);
        }
    }
    for v in 0..shape.n() {
        if boundary.fixed(&shape, v).is_some() || dynamics.probs[v] == 0.0 {
            continue;
        }
        if (shape.depth(v) % 2 == 0) == even_up && !dynamics.blocked(&c, v) {
            c.set(v, true);
        }
    }
    c
}

fn root_proxy(
    dynamics: &HeatBath,
    boundary: &BoundaryCondition,
    eps: f64,
    seeds: &[u64],
    options: &MixingOptions,
) -> Result<MixingEstimate> {
    if seeds.is_empty() {
        return Err(Error::Domain("root proxy needs at least one seed".into()));
    }
    let top = greedy_extreme(dynamics, boundary, true);
    let bottom = greedy_extreme(dynamics, boundary, false);
    let mut chains: Vec<(Configuration, Configuration, ChaCha8Rng, ChaCha8Rng)> = seeds
        .iter()
        .map(|&s| {
            let mut a = ChaCha8Rng::seed_from_u64(s);
            a.set_stream(0);
            let mut b = ChaCha8Rng::seed_from_u64(s);
            b.set_stream(1);
            (top.clone(), bottom.clone(), a, b)
        })
        .collect();
    let k = seeds.len() as f64;
    for t in 0..=options.max_steps {
        let up: f64 = chains.iter().filter(|c| c.0.get(0)).count() as f64 / k;
        let down: f64 = chains.iter().filter(|c| c.1.get(0)).count() as f64 / k;
        let d = (up - down).abs();
        if t > 0 && d <= eps {
            return Ok(MixingEstimate {
                steps: t,
                method: MixingMethod::HeuristicRootProxy,
                distance: d,
                time_factor: dynamics.time_factor(),
            });
        }
        for (x, y, ra, rb) in &mut chains {
            dynamics.step(x, ra);
            dynamics.step(y, rb);
        }
    }
    Err(Error::Budget(format!("root proxy did not settle within {} steps", options.max_steps)))
}
