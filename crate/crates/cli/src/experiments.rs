//! Grid cells and their evaluation, one family per experiment kind.

use hctree::asymptotics::{self, SpineChainParams};
use hctree::bad_boundary::{
    construct_q_sequence, marginal_error, marginal_error_bound, materialize, materialized_root_q,
    RecursiveBoundary,
};
use hctree::coupling_star::{self, StarParams};
use hctree::exact_gibbs::WeightScheme;
use hctree::glauber::{build_matrix, conductance_by, spectral_report, CHAIN_LIMIT};
use hctree::model::{
    reconstruction_omega_estimate, state_count, uniqueness_threshold, BitPattern, BoundaryCondition,
    BoundaryKind, ModelParams, TreeShape,
};
use hctree::numfmt::fmt_f64;
use hctree::reconstruction::{
    bw_cut_conductance_on, exact_broadcast_sensitivity, path_sensitivity_bound, sensitivity_sample,
};
use hctree::{Error, Result};

use crate::spec::{Activity, BoundarySpec, ExperimentKind, ExperimentSpec, SchemeSpec};

/// A single output value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    F(f64),
    I(u64),
    S(String),
    B(bool),
    Empty,
}

impl Value {
    pub fn render(&self) -> String {
        match self {
            Value::F(x) => fmt_f64(*x),
            Value::I(x) => x.to_string(),
            Value::S(s) => s.clone(),
            Value::B(b) => b.to_string(),
            Value::Empty => String::new(),
        }
    }

    fn opt_f(x: Option<f64>) -> Value {
        x.map_or(Value::Empty, Value::F)
    }
}

/// One grid cell: its key columns, seed and the job to evaluate.
#[derive(Debug, Clone)]
pub struct Cell {
    pub key: Vec<String>,
    pub seed: u64,
    pub job: Job,
}

#[derive(Debug, Clone)]
pub enum Job {
    Threshold { b: u64, delta: f64 },
    Gap { b: u64, h: usize, activity: Activity, boundary: BoundarySpec, scheme: SchemeSpec },
    Conductance { b: u64, h: usize, activity: Activity, boundary: BoundarySpec, scheme: SchemeSpec },
    Sensitivity { b: u64, h: usize, activity: Activity, samples: usize },
    BadBoundary { b: u64, level: usize, activity: Activity },
    Spine { h: usize, p: f64, a: f64 },
    Star { b: usize, lambda: f64, rho: f64, runs: usize, max_steps: u64 },
}

/// Evaluated cell: value rows plus an optional non-fatal note.
#[derive(Debug, Clone, Default)]
pub struct CellOutput {
    pub values: Vec<Vec<Value>>,
    pub note: Option<String>,
}

impl CellOutput {
    fn one(values: Vec<Value>) -> Self {
        Self { values: vec![values], note: None }
    }
}

/// Key and value column names of an experiment.
pub fn headers(kind: ExperimentKind) -> (&'static [&'static str], &'static [&'static str]) {
    use ExperimentKind::*;
    match kind {
        Thresholds => (
            &["b", "delta"],
            &[
                "lambda_u",
                "omega_r_estimate",
                "omega",
                "lambda",
                "b0_delta",
                "exponent_d",
                "exponent_residual",
            ],
        ),
        GapScaling => (
            &["b", "h", "activity", "boundary", "scheme"],
            &[
                "lambda",
                "omega",
                "states",
                "n",
                "n_free",
                "gamma2",
                "gamma_min",
                "gap",
                "t_rel",
                "time_factor",
                "t_rel_all_sites",
                "log_trel_over_log_n",
                "binding",
                "residual",
            ],
        ),
        Conductance => (
            &["b", "h", "activity", "boundary", "scheme"],
            &[
                "lambda",
                "omega",
                "ell",
                "phi_u",
                "s_bar",
                "r_eff",
                "bound",
                "bound_holds",
                "t_rel",
                "trel_times_phi",
                "trel_lower_from_cut",
                "phi_root_empty",
            ],
        ),
        Sensitivity => (
            &["b", "h", "activity"],
            &["omega", "samples", "mean", "stderr", "exact", "path_bound"],
        ),
        BadBoundary => (
            &["b", "activity", "i"],
            &[
                "omega",
                "Q_U",
                "Q_L",
                "t",
                "s",
                "eps_plus",
                "eps_minus",
                "ratio",
                "mu_upper_empty",
                "mu_lower_empty",
                "marginal_error",
                "corollary_bound",
                "corollary_holds",
                "exact_Q_U",
                "exact_Q_L",
            ],
        ),
        Asympunn => (
            &["h", "p", "a"],
            &["q", "exact", "brute_force", "rel_error", "approx", "approx_over_exact"],
        ),
        StarCoupling => (
            &["b", "lambda", "rho"],
            &[
                "regime",
                "sum_rho",
                "exact_trel",
                "empirical_tmix",
                "p_round",
                "leaf_dominance",
                "predicted_bound",
                "fitted_constant",
            ],
        ),
    }
}

/// Largest number of boundary leaves streamed for the exact Q check in the
/// bad-boundary experiment.
pub const MATERIALIZE_LEAF_LIMIT: u64 = 1 << 22;
/// Largest state space enumerated for exact sensitivities.
pub const EXACT_SENSITIVITY_LIMIT: f64 = 1e6;

/// Cells of `spec` in canonical grid order.
pub fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    use ExperimentKind::*;
    let seed0 = spec.seeds.first().copied().unwrap_or(0);
    let mut out = Vec::new();
    let fmt = |x: f64| x.to_string();
    match spec.experiment {
        Thresholds => {
            for &b in &spec.b {
                for &delta in &spec.delta {
                    out.push(Cell {
                        key: vec![b.to_string(), fmt(delta)],
                        seed: seed0,
                        job: Job::Threshold { b, delta },
                    });
                }
            }
        }
        GapScaling | Conductance => {
            for &b in &spec.b {
                for &h in &spec.h {
                    for activity in spec.activities() {
                        for boundary in &spec.boundary {
                            for &scheme in &spec.scheme {
                                let key = vec![
                                    b.to_string(),
                                    h.to_string(),
                                    activity.to_string(),
                                    boundary.to_string(),
                                    scheme.to_string(),
                                ];
                                let boundary = boundary.clone();
                                let job = if spec.experiment == GapScaling {
                                    Job::Gap { b, h, activity, boundary, scheme }
                                } else {
                                    Job::Conductance { b, h, activity, boundary, scheme }
                                };
                                out.push(Cell { key, seed: seed0, job });
                            }
                        }
                    }
                }
            }
        }
        Sensitivity => {
            for &b in &spec.b {
                for &h in &spec.h {
                    for activity in spec.activities() {
                        for &seed in &spec.seeds {
                            out.push(Cell {
                                key: vec![b.to_string(), h.to_string(), activity.to_string()],
                                seed,
                                job: Job::Sensitivity { b, h, activity, samples: spec.samples },
                            });
                        }
                    }
                }
            }
        }
        BadBoundary => {
            for &b in &spec.b {
                for activity in spec.activities() {
                    for &level in &spec.h {
                        out.push(Cell {
                            key: vec![b.to_string(), activity.to_string(), level.to_string()],
                            seed: seed0,
                            job: Job::BadBoundary { b, level, activity },
                        });
                    }
                }
            }
        }
        Asympunn => {
            for &h in &spec.h {
                for &p in &spec.p {
                    for &a in &spec.a {
                        out.push(Cell {
                            key: vec![h.to_string(), fmt(p), fmt(a)],
                            seed: seed0,
                            job: Job::Spine { h, p, a },
                        });
                    }
                }
            }
        }
        StarCoupling => {
            for &b in &spec.b {
                for &lambda in &spec.lambda {
                    for &rho in &spec.rho {
                        for &seed in &spec.seeds {
                            out.push(Cell {
                                key: vec![b.to_string(), fmt(lambda), fmt(rho)],
                                seed,
                                job: Job::Star {
                                    b: b as usize,
                                    lambda,
                                    rho,
                                    runs: spec.samples,
                                    max_steps: spec.max_steps,
                                },
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

fn resolve(activity: Activity, b: u64) -> Result<ModelParams> {
    match activity {
        Activity::Delta(d) => ModelParams::from_delta(d, b),
        Activity::Omega(w) => ModelParams::from_omega(w, b),
        Activity::Lambda(l) => ModelParams::from_lambda(l, b),
    }
}

fn tree(b: u64, h: usize) -> Result<TreeShape> {
    let b = usize::try_from(b).map_err(|_| Error::Domain(format!("b={b} too large")))?;
    TreeShape::new(b, h)
}

fn boundary_for(spec: &BoundarySpec, shape: &TreeShape, params: &ModelParams) -> Result<BoundaryCondition> {
    match spec {
        BoundarySpec::Free => Ok(BoundaryCondition::free(shape)),
        BoundarySpec::Hex(h) => {
            BoundaryCondition::explicit(shape, BitPattern::from_hex(shape.num_leaves(), h)?)
        }
        BoundarySpec::Upper | BoundarySpec::Lower => {
            let kind = if *spec == BoundarySpec::Upper { BoundaryKind::Upper } else { BoundaryKind::Lower };
            if shape.h() == 0 {
                return Err(Error::Domain("recursive boundaries need h >= 1".into()));
            }
            let qseq = construct_q_sequence(shape.b() as u64, params.omega, shape.h())?;
            materialize(&RecursiveBoundary::new(&qseq, shape.h(), kind)?, shape)
        }
    }
}

fn scheme_for(scheme: SchemeSpec, params: &ModelParams) -> WeightScheme {
    match scheme {
        SchemeSpec::Uniform => WeightScheme::uniform(params.lambda),
        SchemeSpec::Broadcast => WeightScheme::broadcast(params),
    }
}

fn capacity_check(shape: &TreeShape, boundary: &BoundaryCondition) -> Result<()> {
    let count = state_count(shape, boundary);
    if count > CHAIN_LIMIT {
        return Err(Error::Capacity { estimated: count, limit: CHAIN_LIMIT });
    }
    Ok(())
}

/// Evaluates one cell.
pub fn evaluate(cell: &Cell) -> Result<CellOutput> {
    match &cell.job {
        Job::Threshold { b, delta } => threshold(*b, *delta),
        Job::Gap { b, h, activity, boundary, scheme } => gap(*b, *h, *activity, boundary, *scheme),
        Job::Conductance { b, h, activity, boundary, scheme } => {
            cut(*b, *h, *activity, boundary, *scheme)
        }
        Job::Sensitivity { b, h, activity, samples } => {
            sensitivity(*b, *h, *activity, *samples, cell.seed)
        }
        Job::BadBoundary { b, level, activity } => bad_boundary(*b, *level, *activity),
        Job::Spine { h, p, a } => spine(*h, *p, *a),
        Job::Star { b, lambda, rho, runs, max_steps } => {
            star(*b, *lambda, *rho, *runs, *max_steps, cell.seed)
        }
    }
}

fn threshold(b: u64, delta: f64) -> Result<CellOutput> {
    let params = ModelParams::from_delta(delta, b)?;
    let exp = asymptotics::exponent_d_int(b, delta)?;
    let (b0, note) = match asymptotics::b0(delta) {
        Ok(v) => (Value::I(v), None),
        Err(e @ Error::Budget(_)) => (Value::Empty, Some(format!("b0: {e}"))),
        Err(e) => return Err(e),
    };
    Ok(CellOutput {
        values: vec![vec![
            Value::F(uniqueness_threshold(b)?),
            Value::F(reconstruction_omega_estimate(b)),
            Value::F(params.omega),
            Value::F(params.lambda),
            b0,
            Value::F(exp.d),
            Value::F(exp.residual),
        ]],
        note,
    })
}

fn gap(b: u64, h: usize, activity: Activity, bspec: &BoundarySpec, scheme: SchemeSpec) -> Result<CellOutput> {
    let params = resolve(activity, b)?;
    let shape = tree(b, h)?;
    let boundary = boundary_for(bspec, &shape, &params)?;
    capacity_check(&shape, &boundary)?;
    let chain = build_matrix(&shape, &boundary, &scheme_for(scheme, &params))?;
    let rep = spectral_report(&chain)?;
    let t_all = rep.t_rel / rep.time_factor;
    let n = shape.n() as f64;
    Ok(CellOutput::one(vec![
        Value::F(params.lambda),
        Value::F(params.omega),
        Value::I(chain.len() as u64),
        Value::I(shape.n() as u64),
        Value::I(chain.n_free() as u64),
        Value::F(rep.gamma2),
        Value::F(rep.gamma_min),
        Value::F(rep.gap),
        Value::F(rep.t_rel),
        Value::F(rep.time_factor),
        Value::F(t_all),
        Value::F(t_all.ln() / n.ln()),
        Value::S(format!("{:?}", rep.binding)),
        Value::F(rep.residual),
    ]))
}

fn cut(b: u64, h: usize, activity: Activity, bspec: &BoundarySpec, scheme: SchemeSpec) -> Result<CellOutput> {
    let params = resolve(activity, b)?;
    let shape = tree(b, h)?;
    let boundary = boundary_for(bspec, &shape, &params)?;
    capacity_check(&shape, &boundary)?;
    let chain = build_matrix(&shape, &boundary, &scheme_for(scheme, &params))?;
    // Fixed leaves carry no information, so the labeling reads one level up.
    let ell = if boundary.is_free() { 0 } else { 1 };
    let rep = bw_cut_conductance_on(&chain, &shape, ell)?;
    let t_rel = spectral_report(&chain)?.t_rel;
    let phi_root = conductance_by(&chain, |s| !s.get(0)).ok();
    Ok(CellOutput::one(vec![
        Value::F(params.lambda),
        Value::F(params.omega),
        Value::I(ell as u64),
        Value::F(rep.phi_u),
        Value::F(rep.s_bar),
        Value::F(rep.r_eff),
        Value::opt_f(rep.bound),
        rep.bound_holds.map_or(Value::Empty, Value::B),
        Value::F(t_rel),
        Value::F(t_rel * rep.phi_u),
        Value::F(1.0 / (2.0 * rep.phi_u)),
        Value::opt_f(phi_root),
    ]))
}

fn sensitivity(b: u64, h: usize, activity: Activity, samples: usize, seed: u64) -> Result<CellOutput> {
    let params = resolve(activity, b)?;
    let shape = tree(b, h)?;
    let est = sensitivity_sample(&shape, params.omega, samples, seed, true)?;
    let exact = if state_count(&shape, &BoundaryCondition::free(&shape)) <= EXACT_SENSITIVITY_LIMIT {
        Some(exact_broadcast_sensitivity(&shape, params.omega, true)?)
    } else {
        None
    };
    Ok(CellOutput::one(vec![
        Value::F(params.omega),
        Value::I(est.samples as u64),
        Value::F(est.mean),
        Value::F(est.stderr),
        Value::opt_f(exact),
        Value::F(path_sensitivity_bound(h, b, params.omega)),
    ]))
}

fn bad_boundary(b: u64, level: usize, activity: Activity) -> Result<CellOutput> {
    let params = resolve(activity, b)?;
    let qseq = construct_q_sequence(b, params.omega, level)?;
    let st = *qseq.level(level);
    let ratio = if level >= 2 { qseq.contraction_ratios().last().copied() } else { None };
    let err = marginal_error(&qseq, level);
    let bound = marginal_error_bound(&qseq, level);
    let leaves = b.checked_pow(level as u32).unwrap_or(u64::MAX);
    let (exact_u, exact_l) = if leaves <= MATERIALIZE_LEAF_LIMIT {
        let q = |kind| -> Result<f64> {
            materialized_root_q(&RecursiveBoundary::new(&qseq, level, kind)?, params.omega)
        };
        (Some(q(BoundaryKind::Upper)?), Some(q(BoundaryKind::Lower)?))
    } else {
        (None, None)
    };
    Ok(CellOutput::one(vec![
        Value::F(params.omega),
        Value::F(st.q_upper()),
        Value::F(st.q_lower()),
        Value::I(st.t),
        Value::I(st.s),
        Value::F(st.eps_plus),
        Value::F(st.eps_minus),
        Value::opt_f(ratio),
        Value::F(qseq.root_empty_prob(level, BoundaryKind::Upper)),
        Value::F(qseq.root_empty_prob(level, BoundaryKind::Lower)),
        Value::F(err),
        Value::F(bound),
        Value::B(err <= bound),
        Value::opt_f(exact_u),
        Value::opt_f(exact_l),
    ]))
}

/// Largest height for the brute-force path enumeration.
pub const BRUTE_FORCE_MAX_H: usize = 18;

/// `E[a^N_h]` by summing over all `2^h` paths of the spine chain.
pub fn spine_brute_force(h: usize, p: f64, q: f64, a: f64) -> f64 {
    let mut total = 0.0;
    for mask in 0u64..(1u64 << h) {
        // Bit k set: step k + 1 lands in state 1.
        let mut prob = 1.0;
        let mut weight = 1.0;
        let mut prev_one = false;
        for k in 0..h {
            let one = mask >> k & 1 == 1;
            prob *= match (prev_one, one) {
                (false, false) => p,
                (false, true) => q,
                (true, false) => 1.0,
                (true, true) => 0.0,
            };
            if prob == 0.0 {
                break;
            }
            if !one {
                weight *= a;
            }
            prev_one = one;
        }
        total += prob * weight;
    }
    total
}

fn spine(h: usize, p: f64, a: f64) -> Result<CellOutput> {
    let params = SpineChainParams::homogeneous(p, a)?;
    let exact = asymptotics::exact_a_pow_n(h, &params)?;
    let brute = (h <= BRUTE_FORCE_MAX_H).then(|| spine_brute_force(h, p, 1.0 - p, a));
    let approx = asymptotics::approx_a_pow_n(h, &params).ok();
    Ok(CellOutput::one(vec![
        Value::F(params.q),
        Value::F(exact),
        Value::opt_f(brute),
        Value::opt_f(brute.map(|x| (exact - x).abs() / x.abs())),
        Value::opt_f(approx),
        Value::opt_f(approx.map(|x| x / exact)),
    ]))
}

fn star(b: usize, lambda: f64, rho: f64, runs: usize, max_steps: u64, seed: u64) -> Result<CellOutput> {
    let sp = StarParams::uniform(b, lambda, rho)?;
    let regime = coupling_star::regime_bound(&sp).ok();
    let exact = if b <= coupling_star::STAR_EXACT_MAX_B {
        Some(coupling_star::star_exact_relaxation(&sp)?)
    } else {
        None
    };
    let rounds = (max_steps / coupling_star::round_length(b)).max(1) as usize;
    let est = coupling_star::coupling_estimate(&sp, runs, rounds, seed)?;
    Ok(CellOutput::one(vec![
        regime.map_or(Value::Empty, |r| Value::S(r.regime.tag().to_string())),
        Value::F(sp.sum_rho()),
        Value::opt_f(exact),
        Value::I(est.tmix),
        Value::F(est.p_round),
        Value::B(est.leaf_dominance),
        Value::opt_f(regime.map(|r| r.bound)),
        Value::Empty,
    ]))
}

/// Fills the `fitted_constant` column of star rows: per regime, the largest
/// ratio of empirical mixing estimate to bound formula.
pub fn fit_star_constants(rows: &mut [Vec<Value>]) {
    const REGIME: usize = 0;
    const TMIX: usize = 3;
    const BOUND: usize = 6;
    const FITTED: usize = 7;
    let mut fitted: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
    for r in rows.iter() {
        if let (Value::S(tag), Value::I(t), Value::F(bd)) = (&r[REGIME], &r[TMIX], &r[BOUND]) {
            fitted.entry(tag.clone()).or_default().push((*bd, *t as f64));
        }
    }
    for r in rows.iter_mut() {
        if let Value::S(tag) = &r[REGIME] {
            if let Some(c) = fitted.get(tag).and_then(|pairs| coupling_star::fit_constant(pairs)) {
                r[FITTED] = Value::F(c);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_small() {
        let (p, q, a) = (0.6, 0.4, 1.7);
        assert!((spine_brute_force(1, p, q, a) - (p * a + q)).abs() < 1e-15);
        assert!((spine_brute_force(2, p, q, a) - (p * p * a * a + p * q * a + q * a)).abs() < 1e-15);
    }
}
