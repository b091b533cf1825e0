//! Named experiment specifications.

use crate::spec::{BoundarySpec, ExperimentKind, ExperimentSpec, SchemeSpec};
use crate::CliError;

pub const PRESETS: [&str; 7] = [
    "threshold-table",
    "gap-scaling",
    "bw-conductance",
    "sensitivity",
    "bad-boundary-marginals",
    "asympunn-oracle",
    "star-coupling",
];

pub fn preset(name: &str) -> Result<ExperimentSpec, CliError> {
    use ExperimentKind::*;
    let spec = match name {
        "threshold-table" => {
            let mut s = ExperimentSpec::new(name, Thresholds);
            s.b = vec![2, 3, 5, 10, 20, 50, 100, 1_000, 10_000, 100_000, 1_000_000];
            s.delta = vec![0.25, 0.5, 1.0, 2.0, 4.0];
            s
        }
        "gap-scaling" => {
            let mut s = ExperimentSpec::new(name, GapScaling);
            s.b = vec![2, 3];
            s.h = vec![1, 2, 3];
            s.delta = vec![-0.5, 0.5, 2.0];
            s.boundary = vec![BoundarySpec::Free, BoundarySpec::Upper, BoundarySpec::Lower];
            s
        }
        "bw-conductance" => {
            let mut s = ExperimentSpec::new(name, Conductance);
            s.b = vec![2, 3];
            s.h = vec![1, 2, 3];
            s.omega = vec![0.25, 1.0, 2.5];
            s.scheme = vec![SchemeSpec::Broadcast];
            s
        }
        "sensitivity" => {
            let mut s = ExperimentSpec::new(name, Sensitivity);
            s.b = vec![2, 3];
            s.h = (2..=8).collect();
            s.omega = vec![0.5, 1.5];
            s.samples = 4096;
            s
        }
        "bad-boundary-marginals" => {
            let mut s = ExperimentSpec::new(name, BadBoundary);
            s.b = vec![2, 3, 4, 5, 6];
            s.h = (1..=40).collect();
            s.omega = (1..=9).map(|k| k as f64 / 10.0).collect();
            s
        }
        "asympunn-oracle" => {
            let mut s = ExperimentSpec::new(name, Asympunn);
            s.h = (1..=18).collect();
            s.p = vec![0.3, 0.6, 0.9];
            s.a = vec![0.8, 1.5, 3.0];
            s
        }
        "star-coupling" => {
            let mut s = ExperimentSpec::new(name, StarCoupling);
            s.b = vec![3, 6, 9, 12];
            s.lambda = vec![0.5, 2.0, 8.0];
            s.rho = vec![0.0, 0.3, 0.7, 0.95];
            s.samples = 400;
            s.max_steps = 200_000;
            s
        }
        _ => {
            return Err(CliError::Spec(format!(
                "unknown preset '{name}' (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(spec)
}

/// Preset used by each experiment subcommand.
pub fn default_for(kind: ExperimentKind) -> ExperimentSpec {
    let name = match kind {
        ExperimentKind::Thresholds => "threshold-table",
        ExperimentKind::GapScaling => "gap-scaling",
        ExperimentKind::Conductance => "bw-conductance",
        ExperimentKind::Sensitivity => "sensitivity",
        ExperimentKind::BadBoundary => "bad-boundary-marginals",
        ExperimentKind::Asympunn => "asympunn-oracle",
        ExperimentKind::StarCoupling => "star-coupling",
    };
    preset(name).expect("built-in preset")
}
