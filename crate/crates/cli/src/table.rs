//! The `table` command: reruns the reference cases and prints fresh
//! results beside the published values.

use std::fmt::Write as _;

use driftmle::mc::{run_experiment_with, CellSummary};
use driftmle::model::CheckStatus;
use driftmle::tables::{self, ReferenceCase};
use driftmle::{check_assumptions, Execution, ExperimentConfig, ExperimentOutcome, ProbeSpec};
use serde::Serialize;
use serde_json::json;

use crate::commands::{mc_error, Out};
use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output;

/// Default master seed when neither the config nor `--seed` gives one.
pub const DEFAULT_SEED: u64 = 1;

/// Parses `n=5000,alpha=0.9`.
pub fn parse_cell(s: &str) -> Result<(u64, f64), CliError> {
    let bad = || CliError::config("--cell", format!("expected `n=INT,alpha=FLOAT`, got `{s}`"));
    let (mut n, mut alpha) = (None, None);
    for part in s.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(bad)?;
        match key.trim() {
            "n" => n = Some(value.trim().parse().map_err(|_| bad())?),
            "alpha" => alpha = Some(value.trim().parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    Ok((n.ok_or_else(bad)?, alpha.ok_or_else(bad)?))
}

/// Fills the grid, replicate count and seed from the reference protocol
/// where the config leaves them open.
pub fn complete(cfg: &mut RunConfig) -> Result<(), CliError> {
    if cfg.model.is_some() {
        return Err(CliError::config(
            "model",
            "not used by `table`; the reference cases fix the model",
        ));
    }
    let e = &mut cfg.experiment;
    e.ns.get_or_insert_with(|| tables::NS.to_vec());
    e.alphas.get_or_insert_with(|| tables::ALPHAS.to_vec());
    e.replicates.get_or_insert(tables::REPLICATES);
    e.master_seed.get_or_insert(DEFAULT_SEED);
    Ok(())
}

#[derive(Debug, Serialize)]
struct CellReport<'a> {
    #[serde(flatten)]
    fresh: &'a CellSummary,
    published_mean: Option<f64>,
    published_std: Option<f64>,
}

pub fn run(cfg: &RunConfig, case_ids: &[u8], out: Out) -> Result<(), CliError> {
    let mut cases_json = Vec::new();
    let mut all_records = Vec::new();
    for &id in case_ids {
        let case = tables::case(id)
            .ok_or_else(|| CliError::config("--case", format!("no reference case {id} (expected 1, 2 or 3)")))?;
        let model = case.model();
        let exp = ExperimentConfig {
            label: id.to_string(),
            model: model.clone(),
            alphas: cfg.experiment.alphas.clone().expect("completed"),
            ns: cfg.experiment.ns.clone().expect("completed"),
            replicates: cfg.experiment.replicates.expect("completed"),
            method: cfg.scheme.method,
            master_seed: cfg.experiment.master_seed.expect("completed"),
            substeps: cfg.scheme.substeps,
        };
        exp.validate().map_err(|e| CliError::config("experiment", e))?;
        let report = check_assumptions(&model, ProbeSpec::default());
        let outcome = run_experiment_with(&exp, Execution::Parallel).map_err(mc_error)?;
        write!(out, "{}", render(case, &exp, &outcome)).map_err(|e| CliError::io("<stdout>", e))?;
        let failed: Vec<String> = report
            .entries
            .iter()
            .filter(|e| e.status == CheckStatus::Fail)
            .map(|e| e.id.to_string())
            .collect();
        if !failed.is_empty() {
            writeln!(
                out,
                "note: numerical assumption checks fail for {}\n",
                failed.join(", ")
            )
            .map_err(|e| CliError::io("<stdout>", e))?;
        }
        let cells: Vec<CellReport> = outcome
            .cells
            .iter()
            .map(|c| {
                let reference = case.cell(c.n, c.alpha);
                CellReport {
                    fresh: c,
                    published_mean: reference.map(|r| r.0),
                    published_std: reference.map(|r| r.1),
                }
            })
            .collect();
        cases_json.push(json!({
            "case": id,
            "a": case.a,
            "b": case.b,
            "fingerprint": model.fingerprint(),
            "info": outcome.info,
            "assumptions": report,
            "cells": cells,
        }));
        all_records.extend(outcome.replicates);
    }
    if let Some(dir) = &cfg.io.out_dir {
        let config = cfg.to_json().to_string();
        if cfg.io.wants(Format::Csv) {
            let meta = [
                ("command", "table".to_string()),
                ("version", env!("CARGO_PKG_VERSION").to_string()),
                ("generator", driftmle::sim::GENERATOR_ID.to_string()),
                ("config", config),
            ];
            output::write_replicates_csv(dir, "table_replicates.csv", &meta, &all_records)?;
        }
        if cfg.io.wants(Format::Json) {
            let doc = json!({
                "command": "table",
                "config": cfg.to_json(),
                "version": env!("CARGO_PKG_VERSION"),
                "generator": driftmle::sim::GENERATOR_ID,
                "cases": cases_json,
            });
            output::write_json(dir, "table.json", &doc)?;
        }
        output::write_json(dir, "config.json", &cfg.to_json())?;
    }
    Ok(())
}

/// One block per case: rows `Mean` and `Std. dev.` for each α, columns
/// over `n`, each entry `fresh [published]`.
pub fn render(case: &ReferenceCase, exp: &ExperimentConfig, outcome: &ExperimentOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Table {}: a(x) = {}, b(x) = {}   (theta = {}, x0 = {}, {} replicates, {}, seed {})",
        case.id, case.a, case.b, exp.model.theta, exp.model.x0, exp.replicates, exp.method, exp.master_seed
    );
    let _ = writeln!(s, "fresh result [published value]");
    let _ = write!(s, "{:<24}", "");
    for n in &exp.ns {
        let _ = write!(s, "{:>22}", format!("n = {n}"));
    }
    s.push('\n');
    for &alpha in &exp.alphas {
        for (row, label) in [(0, "Mean"), (1, "Std. dev.")] {
            let head = if row == 0 {
                format!("alpha = {alpha}")
            } else {
                String::new()
            };
            let _ = write!(s, "{head:<14}{label:<10}");
            for &n in &exp.ns {
                let cell = outcome.cells.iter().find(|c| c.n == n && c.alpha == alpha);
                let fresh = cell.map(|c| if row == 0 { c.mean_theta_hat } else { c.std_theta_hat });
                let published = case.cell(n, alpha).map(|r| if row == 0 { r.0 } else { r.1 });
                let text = match (fresh, published) {
                    (Some(f), Some(p)) => format!("{f:.5} [{p:.5}]"),
                    (Some(f), None) => format!("{f:.5} [-]"),
                    _ => "-".to_string(),
                };
                let _ = write!(s, "{text:>22}");
            }
            s.push('\n');
        }
    }
    let failures: u32 = outcome.cells.iter().map(|c| c.failures).sum();
    if failures > 0 {
        let _ = writeln!(s, "failed replicates: {failures}");
    }
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_spec() {
        assert_eq!(parse_cell("n=5000,alpha=0.9").unwrap(), (5000, 0.9));
        assert_eq!(parse_cell("alpha=0.5, n=100").unwrap(), (100, 0.5));
        assert!(parse_cell("n=5000").is_err());
        assert!(parse_cell("n=5000,beta=1").is_err());
    }
}
