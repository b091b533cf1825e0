//! Experiment specifications: a flat `key = value` format where list values
//! are comma separated and integer ranges may be written `lo..hi`
//! (inclusive).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ExperimentKind {
    Thresholds,
    GapScaling,
    Conductance,
    Sensitivity,
    BadBoundary,
    Asympunn,
    StarCoupling,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Thresholds,
        ExperimentKind::GapScaling,
        ExperimentKind::Conductance,
        ExperimentKind::Sensitivity,
        ExperimentKind::BadBoundary,
        ExperimentKind::Asympunn,
        ExperimentKind::StarCoupling,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Thresholds => "thresholds",
            ExperimentKind::GapScaling => "gap-scaling",
            ExperimentKind::Conductance => "conductance",
            ExperimentKind::Sensitivity => "sensitivity",
            ExperimentKind::BadBoundary => "bad-boundary",
            ExperimentKind::Asympunn => "asympunn",
            ExperimentKind::StarCoupling => "star-coupling",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Spec(format!("unknown experiment '{s}'")))
    }
}

/// Leaf boundary of a grid cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum BoundarySpec {
    Free,
    /// Recursive upper boundary built for the cell's `(b, omega)`.
    Upper,
    /// Recursive lower boundary built for the cell's `(b, omega)`.
    Lower,
    /// Explicit leaf pattern, most significant bit first.
    Hex(String),
}

impl fmt::Display for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundarySpec::Free => f.write_str("free"),
            BoundarySpec::Upper => f.write_str("U"),
            BoundarySpec::Lower => f.write_str("L"),
            BoundarySpec::Hex(h) => write!(f, "hex:{h}"),
        }
    }
}

impl FromStr for BoundarySpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "free" => Ok(BoundarySpec::Free),
            "U" => Ok(BoundarySpec::Upper),
            "L" => Ok(BoundarySpec::Lower),
            _ => match s.strip_prefix("hex:") {
                Some(h) if !h.is_empty() && h.chars().all(|c| c.is_ascii_hexdigit()) => {
                    Ok(BoundarySpec::Hex(h.to_ascii_lowercase()))
                }
                _ => Err(CliError::Spec(format!("bad boundary '{s}' (free, U, L or hex:...)"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SchemeSpec {
    Uniform,
    Broadcast,
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeSpec::Uniform => "uniform",
            SchemeSpec::Broadcast => "broadcast",
        })
    }
}

impl FromStr for SchemeSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "uniform" => Ok(SchemeSpec::Uniform),
            "broadcast" => Ok(SchemeSpec::Broadcast),
            _ => Err(CliError::Spec(format!("bad scheme '{s}' (uniform or broadcast)"))),
        }
    }
}

/// How a cell fixes the activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Activity {
    Delta(f64),
    Omega(f64),
    Lambda(f64),
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activity::Delta(x) => write!(f, "delta={x}"),
            Activity::Omega(x) => write!(f, "omega={x}"),
            Activity::Lambda(x) => write!(f, "lambda={x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub experiment: ExperimentKind,
    pub b: Vec<u64>,
    pub h: Vec<usize>,
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
    pub lambda: Vec<f64>,
    pub boundary: Vec<BoundarySpec>,
    pub scheme: Vec<SchemeSpec>,
    /// Leaf probabilities for star experiments (all leaves share one value).
    pub rho: Vec<f64>,
    /// Spine-chain stay probabilities.
    pub p: Vec<f64>,
    /// Spine-chain weights.
    pub a: Vec<f64>,
    pub seeds: Vec<u64>,
    pub samples: usize,
    pub max_steps: u64,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(name: &str, experiment: ExperimentKind) -> Self {
        Self {
            name: name.to_string(),
            experiment,
            b: Vec::new(),
            h: Vec::new(),
            delta: Vec::new(),
            omega: Vec::new(),
            lambda: Vec::new(),
            boundary: vec![BoundarySpec::Free],
            scheme: vec![SchemeSpec::Uniform],
            rho: Vec::new(),
            p: Vec::new(),
            a: Vec::new(),
            seeds: vec![1],
            samples: 4096,
            max_steps: 1_000_000,
            out: None,
        }
    }

    /// Parses the text format. Unknown keys and repeated keys are errors;
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut pairs = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Spec(format!("line {}: expected key = value", no + 1)))?;
            let k = k.trim().to_string();
            if pairs.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Spec(format!("line {}: key '{k}' repeated", no + 1)));
            }
        }
        let kind: ExperimentKind = pairs
            .remove("experiment")
            .ok_or_else(|| CliError::Spec("missing key 'experiment'".into()))?
            .parse()?;
        let name = pairs.remove("name").unwrap_or_else(|| kind.to_string());
        let mut spec = Self::new(&name, kind);
        for (k, v) in &pairs {
            spec.set(k, v)?;
        }
        Ok(spec)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "name" => self.name = value.to_string(),
            "experiment" => self.experiment = value.parse()?,
            "b" => self.b = parse_ints(key, value)?,
            "h" => self.h = parse_ints(key, value)?.into_iter().map(|x| x as usize).collect(),
            "delta" => self.delta = parse_list(key, value)?,
            "omega" => self.omega = parse_list(key, value)?,
            "lambda" => self.lambda = parse_list(key, value)?,
            "boundary" => self.boundary = parse_list(key, value)?,
            "scheme" => self.scheme = parse_list(key, value)?,
            "rho" => self.rho = parse_list(key, value)?,
            "p" => self.p = parse_list(key, value)?,
            "a" => self.a = parse_list(key, value)?,
            "seed" | "seeds" => self.seeds = parse_ints(key, value)?,
            "samples" => self.samples = parse_one(key, value)?,
            "max_steps" => self.max_steps = parse_one(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(CliError::Spec(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Activity axis: every delta, then every omega, then every lambda.
    pub fn activities(&self) -> Vec<Activity> {
        self.delta
            .iter()
            .map(|&x| Activity::Delta(x))
            .chain(self.omega.iter().map(|&x| Activity::Omega(x)))
            .chain(self.lambda.iter().map(|&x| Activity::Lambda(x)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        use ExperimentKind::*;
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Spec(format!("{}: empty grid axis '{what}'", self.experiment)))
            }
        };
        match self.experiment {
            Thresholds => {
                need(!self.b.is_empty(), "b")?;
                need(!self.delta.is_empty(), "delta")?;
            }
            GapScaling | Conductance => {
                need(!self.b.is_empty(), "b")?;
                need(!self.h.is_empty(), "h")?;
                need(!self.activities().is_empty(), "delta/omega/lambda")?;
                need(!self.boundary.is_empty(), "boundary")?;
                need(!self.scheme.is_empty(), "scheme")?;
            }
            Sensitivity => {
                need(!self.b.is_empty(), "b")?;
                need(!self.h.is_empty(), "h")?;
                need(!self.activities().is_empty(), "delta/omega/lambda")?;
                need(!self.seeds.is_empty(), "seed")?;
                if self.samples == 0 {
                    return Err(CliError::Spec("samples must be positive".into()));
                }
            }
            BadBoundary => {
                need(!self.b.is_empty(), "b")?;
                need(!self.h.is_empty(), "h")?;
                need(!self.activities().is_empty(), "delta/omega/lambda")?;
            }
            Asympunn => {
                need(!self.h.is_empty(), "h")?;
                need(!self.p.is_empty(), "p")?;
                need(!self.a.is_empty(), "a")?;
            }
            StarCoupling => {
                need(!self.b.is_empty(), "b")?;
                need(!self.lambda.is_empty(), "lambda")?;
                need(!self.rho.is_empty(), "rho")?;
                need(!self.seeds.is_empty(), "seed")?;
                if self.samples == 0 {
                    return Err(CliError::Spec("samples must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Canonical text form: one `key = value` line per key in sorted order,
    /// output path excluded.
    pub fn canonical(&self) -> String {
        fn join<T: fmt::Display>(xs: &[T]) -> String {
            xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut m = BTreeMap::new();
        m.insert("a", join(&self.a));
        m.insert("b", join(&self.b));
        m.insert("boundary", join(&self.boundary));
        m.insert("delta", join(&self.delta));
        m.insert("experiment", self.experiment.to_string());
        m.insert("h", join(&self.h));
        m.insert("lambda", join(&self.lambda));
        m.insert("max_steps", self.max_steps.to_string());
        m.insert("name", self.name.clone());
        m.insert("omega", join(&self.omega));
        m.insert("p", join(&self.p));
        m.insert("rho", join(&self.rho));
        m.insert("samples", self.samples.to_string());
        m.insert("scheme", join(&self.scheme));
        m.insert("seeds", join(&self.seeds));
        m.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn parse_one<T: FromStr>(key: &str, s: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Spec(format!("{key}: cannot parse '{s}'")))
}

fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_one(key, x)).collect()
}

fn parse_ints(key: &str, s: &str) -> Result<Vec<u64>, CliError> {
    let mut out = Vec::new();
    if s.trim().is_empty() {
        return Ok(out);
    }
    for part in s.split(',') {
        match part.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi): (u64, u64) = (parse_one(key, lo)?, parse_one(key, hi)?);
                if lo > hi {
                    return Err(CliError::Spec(format!("{key}: empty range '{part}'")));
                }
                out.extend(lo..=hi);
            }
            None => out.push(parse_one(key, part)?),
        }
    }
    Ok(out)
}
