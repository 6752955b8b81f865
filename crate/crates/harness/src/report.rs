use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{ReconstructionReport, StageFailure};

/// Scalar contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub experiment_id: String,
    pub status: String,
    pub failure: Option<StageFailure>,
    pub l2_error: Option<f64>,
    pub iterations_used: usize,
    pub termination: String,
    pub final_objective: Option<f64>,
    pub n_nodes: usize,
    pub wall_time_s: f64,
    pub config: ExperimentConfig,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ReportSummary {
    pub fn from_report(r: &ReconstructionReport) -> Self {
        Self {
            experiment_id: r.config.experiment_id.to_string(),
            status: if r.succeeded() { "completed" } else { "failed" }.into(),
            failure: r.failure.clone(),
            l2_error: finite(r.l2_error),
            iterations_used: r.iterations_used,
            termination: r.termination.clone(),
            final_objective: finite(r.final_objective()),
            n_nodes: r.xi.len(),
            wall_time_s: r.wall_time_s,
            config: r.config.clone(),
        }
    }
}

/// 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(path: &Path, header: &str, columns: &[&[f64]], lead: Option<&[usize]>) -> Result<()> {
    let mut out = String::with_capacity(64 * columns.first().map_or(1, |c| c.len() + 1));
    out.push_str(header);
    out.push('\n');
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        let mut fields: Vec<String> = Vec::with_capacity(columns.len() + 1);
        if let Some(l) = lead {
            fields.push(l[i].to_string());
        }
        fields.extend(columns.iter().map(|c| fmt_num(c[i])));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

/// Writes `report.json`, `coefficient.csv`, `history.csv` and `final_state.csv`.
pub fn write_report(report: &ReconstructionReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let json = out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&ReportSummary::from_report(report))
        .map_err(|source| HarnessError::Json { path: json.clone(), source })?;
    fs::write(&json, text + "\n").map_err(|e| HarnessError::io(&json, e))?;

    let coeff = out_dir.join("coefficient.csv");
    write_csv(
        &coeff,
        "xi,exact,recovered,initial",
        &[&report.xi, &report.exact, &report.recovered, &report.initial],
        None,
    )?;

    let history = out_dir.join("history.csv");
    let iters: Vec<usize> = report.history.iter().map(|r| r.iter).collect();
    let obj: Vec<f64> = report.history.iter().map(|r| r.objective).collect();
    let pg: Vec<f64> = report.history.iter().map(|r| r.pg_norm).collect();
    let step: Vec<f64> = report.history.iter().map(|r| r.step_len).collect();
    write_csv(&history, "iter,objective,pg_norm,step_len", &[&obj, &pg, &step], Some(&iters))?;

    let state = out_dir.join("final_state.csv");
    write_csv(
        &state,
        "xi,eta,u,m1,m2",
        &[&report.xi, &report.final_eta, &report.final_u, &report.m1, &report.m2],
        None,
    )?;
    Ok(vec![json, coeff, history, state])
}

pub fn read_summary(path: &Path) -> Result<ReportSummary> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })
}
