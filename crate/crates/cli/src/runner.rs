use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use hctree::Error;

use crate::experiments::{self, CellOutput, Value};
use crate::spec::{ExperimentKind, ExperimentSpec};
use crate::{CliError, BUILD_ID};

/// Columns appended after the experiment's own columns.
pub const TRAILER: [&str; 5] = ["status", "error", "seed", "build_id", "spec_hash"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub experiment: ExperimentKind,
    pub spec_hash: String,
    pub build_id: String,
    pub cells: usize,
    pub rows: usize,
    pub ok: usize,
    pub partial: usize,
    pub estimate_only: usize,
    pub errors: usize,
    /// Errors other than capacity and budget limits.
    pub fatal: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Summary,
}

impl RunOutput {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Necessary).from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

fn is_fatal(e: &Error) -> bool {
    !matches!(e, Error::Capacity { .. } | Error::Budget(_))
}

/// Runs every cell of `spec` on the rayon pool. Cell failures are recorded in
/// the `status`/`error` columns and never abort the grid.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutput, CliError> {
    spec.validate()?;
    let (keys, values) = experiments::headers(spec.experiment);
    let cells = experiments::cells(spec);
    if cells.is_empty() {
        return Err(CliError::Spec("grid has no cells".into()));
    }
    let results: Vec<hctree::Result<CellOutput>> =
        cells.par_iter().map(experiments::evaluate).collect();

    let mut values_rows: Vec<(usize, usize, Vec<Value>)> = Vec::new();
    let mut status_rows: Vec<(usize, usize, &'static str, String)> = Vec::new();
    let mut summary = Summary {
        name: spec.name.clone(),
        experiment: spec.experiment,
        spec_hash: spec.hash(),
        build_id: BUILD_ID.to_string(),
        cells: cells.len(),
        rows: 0,
        ok: 0,
        partial: 0,
        estimate_only: 0,
        errors: 0,
        fatal: 0,
    };
    for (ci, res) in results.into_iter().enumerate() {
        match res {
            Ok(out) => {
                let status = if out.note.is_some() { "partial" } else { "ok" };
                if out.note.is_some() {
                    summary.partial += 1;
                } else {
                    summary.ok += 1;
                }
                for (ri, v) in out.values.into_iter().enumerate() {
                    values_rows.push((ci, ri, v));
                    status_rows.push((ci, ri, status, out.note.clone().unwrap_or_default()));
                }
            }
            Err(e) => {
                let status = match e {
                    Error::Capacity { .. } => {
                        summary.estimate_only += 1;
                        "estimate-only"
                    }
                    _ => {
                        summary.errors += 1;
                        "error"
                    }
                };
                if is_fatal(&e) {
                    summary.fatal += 1;
                }
                values_rows.push((ci, 0, vec![Value::Empty; values.len()]));
                status_rows.push((ci, 0, status, e.to_string()));
            }
        }
    }
    if spec.experiment == ExperimentKind::StarCoupling {
        let mut vals: Vec<Vec<Value>> = values_rows.iter().map(|r| r.2.clone()).collect();
        experiments::fit_star_constants(&mut vals);
        for (r, v) in values_rows.iter_mut().zip(vals) {
            r.2 = v;
        }
    }

    let mut rows: Vec<((usize, usize), Vec<String>)> = values_rows
        .into_iter()
        .zip(status_rows)
        .map(|((ci, ri, v), (_, _, status, err))| {
            let cell = &cells[ci];
            let mut row = cell.key.clone();
            row.extend(v.iter().map(Value::render));
            row.push(status.to_string());
            row.push(err);
            row.push(cell.seed.to_string());
            row.push(summary.build_id.clone());
            row.push(summary.spec_hash.clone());
            ((ci, ri), row)
        })
        .collect();
    // Canonical order: grid order of the cells, then row order within a cell.
    rows.sort_by_key(|r| r.0);
    summary.rows = rows.len();

    let header = keys
        .iter()
        .chain(values.iter())
        .chain(TRAILER.iter())
        .map(|s| s.to_string())
        .collect();
    Ok(RunOutput { header, rows: rows.into_iter().map(|r| r.1).collect(), summary })
}
