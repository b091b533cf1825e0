use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hctree_experiments::presets::{default_for, preset};
use hctree_experiments::spec::{ExperimentKind, ExperimentSpec};
use hctree_experiments::{run, CliError};

#[derive(Parser)]
#[command(name = "hctree", version, about = "Hard-core model experiments on regular trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Uniqueness and reconstruction thresholds, b0 and the exponent formula.
    Thresholds(GridArgs),
    /// Exact spectral gaps across heights and boundaries.
    GapScaling(GridArgs),
    /// Conductance of the labeling cut against its sensitivity bound.
    Conductance(GridArgs),
    /// Monte Carlo and exact average sensitivity of the labeling.
    Sensitivity(GridArgs),
    /// Q-value recursion of the recursive boundaries.
    BadBoundary(GridArgs),
    /// Spine-chain expectation: closed form, brute force and approximation.
    Asympunn(GridArgs),
    /// Star dynamics: exact relaxation and maximal coupling.
    StarCoupling(GridArgs),
    /// Run a spec file or a named preset.
    Run(RunArgs),
}

/// Grid overrides; each list flag takes comma-separated values.
#[derive(Args, Default)]
struct GridArgs {
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    /// free, U, L or hex:<pattern>
    #[arg(long)]
    boundary: Option<String>,
    /// uniform or broadcast
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    max_steps: Option<String>,
    /// Output CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a JSON run summary here.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Extra key=value overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
}

impl GridArgs {
    fn apply(&self, spec: &mut ExperimentSpec) -> Result<(), CliError> {
        let flags = [
            ("b", &self.b),
            ("h", &self.h),
            ("delta", &self.delta),
            ("omega", &self.omega),
            ("lambda", &self.lambda),
            ("rho", &self.rho),
            ("boundary", &self.boundary),
            ("scheme", &self.scheme),
            ("seed", &self.seed),
            ("samples", &self.samples),
            ("max_steps", &self.max_steps),
        ];
        // Any activity flag replaces the whole activity axis of the base spec.
        if self.delta.is_some() || self.omega.is_some() || self.lambda.is_some() {
            spec.delta.clear();
            spec.omega.clear();
            spec.lambda.clear();
        }
        for (key, value) in flags {
            if let Some(v) = value {
                spec.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Spec(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            spec.set(k.trim(), v)?;
        }
        if let Some(out) = &self.out {
            spec.out = Some(out.clone());
        }
        Ok(())
    }
}

fn execute(spec: &ExperimentSpec, summary_path: Option<&PathBuf>) -> Result<bool, CliError> {
    let output = run(spec)?;
    match &spec.out {
        Some(path) => output.write_csv(BufWriter::new(File::create(path)?))?,
        None => output.write_csv(io::stdout().lock())?,
    }
    if let Some(path) = summary_path {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, &output.summary)?;
        writeln!(f)?;
    }
    let s = &output.summary;
    eprintln!(
        "{}: {} cells, {} rows, {} ok, {} partial, {} estimate-only, {} errors ({} fatal)",
        s.name, s.cells, s.rows, s.ok, s.partial, s.estimate_only, s.errors, s.fatal
    );
    Ok(s.fatal == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, grid) = match &cli.command {
        Command::Thresholds(g) => (Some(ExperimentKind::Thresholds), g),
        Command::GapScaling(g) => (Some(ExperimentKind::GapScaling), g),
        Command::Conductance(g) => (Some(ExperimentKind::Conductance), g),
        Command::Sensitivity(g) => (Some(ExperimentKind::Sensitivity), g),
        Command::BadBoundary(g) => (Some(ExperimentKind::BadBoundary), g),
        Command::Asympunn(g) => (Some(ExperimentKind::Asympunn), g),
        Command::StarCoupling(g) => (Some(ExperimentKind::StarCoupling), g),
        Command::Run(r) => (None, &r.grid),
    };
    let result = (|| {
        let mut spec = match (kind, &cli.command) {
            (Some(k), _) => default_for(k),
            (None, Command::Run(r)) => match (&r.spec, &r.preset) {
                (Some(path), _) => ExperimentSpec::parse(&std::fs::read_to_string(path)?)?,
                (None, Some(name)) => preset(name)?,
                (None, None) => unreachable!("clap requires --spec or --preset"),
            },
            (None, _) => unreachable!(),
        };
        grid.apply(&mut spec)?;
        execute(&spec, grid.summary.as_ref())
    })();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
