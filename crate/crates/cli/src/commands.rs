use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use driftmle::mc::{run_experiment_with, McError};
use driftmle::model::{AssumptionId, CheckStatus};
use driftmle::sim::{read_path_csv, write_path_csv, GENERATOR_ID};
use driftmle::{
    check_assumptions, estimate, invariant_law, simulate_and_estimate, simulate_path, AssumptionReport, DiffusionModel,
    Execution, ProbeSpec,
};
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::{self, EstimateRow};

/// Where the report goes; stdout in the binary, a buffer in tests.
pub type Out<'a> = &'a mut (dyn Write + Send);

fn emit(out: Out, text: impl std::fmt::Display) -> Result<(), CliError> {
    write!(out, "{text}").map_err(|e| CliError::io("<stdout>", e))
}

/// Metadata lines for CSV artifacts. Path files already carry the
/// generator and fingerprint, so those are opt-in.
fn provenance(command: &str, cfg: &RunConfig, model: Option<&DiffusionModel>) -> Vec<(&'static str, String)> {
    let mut meta = vec![
        ("command", command.to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
    ];
    if let Some(model) = model {
        meta.push(("generator", GENERATOR_ID.to_string()));
        meta.push(("fingerprint", model.fingerprint()));
    }
    meta.push(("config", cfg.to_json().to_string()));
    meta
}

/// Fails with exit code 2 if any of `gating` failed and `force` is off.
fn gate(report: &AssumptionReport, gating: &[AssumptionId], force: bool) -> Result<(), CliError> {
    let failed: Vec<AssumptionId> = gating
        .iter()
        .copied()
        .filter(|&id| report.status(id) == CheckStatus::Fail)
        .collect();
    if failed.is_empty() || force {
        return Ok(());
    }
    Err(CliError::Assumption {
        failed,
        report: report.to_string(),
    })
}

pub fn check(cfg: &RunConfig, force: bool, out: Out) -> Result<(), CliError> {
    let model = cfg.model()?;
    if cfg.scheme.n.is_some() || cfg.scheme.alpha.is_some() {
        cfg.scheme()?;
    }
    let report = check_assumptions(&model, ProbeSpec::default());
    emit(
        out,
        format_args!(
            "model: a(x) = {}, b(x) = {}, theta = {}, x0 = {}\n",
            model.a, model.b, model.theta, model.x0
        ),
    )?;
    emit(out, &report)?;
    let mut summary = json!({
        "command": "check",
        "config": cfg.to_json(),
        "fingerprint": model.fingerprint(),
        "assumptions": report,
    });
    match invariant_law(&model) {
        Ok(law) => {
            emit(
                out,
                format_args!("G = {:.10}\ninfo = E d(xi) = {:.10}\n", law.g, law.info),
            )?;
            emit(
                out,
                format_args!(
                    "asymptotic std of n^(alpha/2)(theta_hat - theta) = {:.10}\n",
                    1.0 / law.info.sqrt()
                ),
            )?;
            summary["G"] = json!(law.g);
            summary["info"] = json!(law.info);
            if let (Some(n), Some(alpha)) = (cfg.scheme.n, cfg.scheme.alpha) {
                let std = law.predicted_std(n, alpha);
                emit(
                    out,
                    format_args!("predicted std of theta_hat at n = {n}, alpha = {alpha}: {std:.10}\n"),
                )?;
                summary["predicted_std"] = json!({"n": n, "alpha": alpha, "value": std});
            }
        }
        Err(e) => {
            emit(out, format_args!("invariant law unavailable: {e}\n"))?;
            summary["invariant_law_error"] = json!(e.to_string());
        }
    }
    if let Some(dir) = &cfg.io.out_dir {
        if cfg.io.wants(Format::Json) {
            output::write_json(dir, "check.json", &summary)?;
        }
    }
    gate(&report, &blocking(), force)
}

fn blocking() -> Vec<AssumptionId> {
    use AssumptionId::*;
    vec![A1, A2, A3, A4, A5, A6]
}

pub fn simulate(cfg: &RunConfig, force: bool, out: Out) -> Result<(), CliError> {
    let model = cfg.model()?;
    let scheme = cfg.scheme()?;
    let seed = cfg.seed()?;
    let dir = cfg.out_dir()?;
    gate(
        &check_assumptions(&model, ProbeSpec::default()),
        &[AssumptionId::A1],
        force,
    )?;
    let path =
        simulate_path(&model, &scheme, cfg.scheme.method, seed).map_err(|e| CliError::Numerical(e.to_string()))?;
    let meta = provenance("simulate", cfg, None);
    if cfg.io.wants(Format::Csv) {
        let target = output::write_atomic(dir, "path.csv", |w| write_path_csv(&path, w, &meta))?;
        emit(out, format_args!("wrote {}\n", target.display()))?;
    }
    if cfg.io.wants(Format::Json) {
        let doc = json!({
            "command": "simulate",
            "config": cfg.to_json(),
            "generator": GENERATOR_ID,
            "path": path,
        });
        let target = output::write_json(dir, "path.json", &doc)?;
        emit(out, format_args!("wrote {}\n", target.display()))?;
    }
    emit(
        out,
        format_args!(
            "N = {}, X_N = {:?}\n",
            scheme.observations(),
            path.values.last().copied().unwrap_or(model.x0)
        ),
    )
}

pub fn estimate_cmd(cfg: &RunConfig, path_file: Option<&Path>, force: bool, out: Out) -> Result<(), CliError> {
    let model = cfg.model()?;
    let numerical = |e: &dyn std::fmt::Display| CliError::Numerical(e.to_string());
    let (row, source) = match path_file {
        Some(p) => {
            let file = File::open(p).map_err(|e| CliError::io(p, e))?;
            let path = read_path_csv(BufReader::new(file))
                .map_err(|e| CliError::config("path", format!("{}: {e}", p.display())))?;
            let r = estimate(&path, &model.a, &model.b).map_err(|e| numerical(&e))?;
            let row = EstimateRow::new(path.seed, path.scheme.n(), path.scheme.alpha(), path.method, &r);
            (row, json!({"path_file": p}))
        }
        None => {
            let scheme = cfg.scheme()?;
            let seed = cfg.seed()?;
            gate(
                &check_assumptions(&model, ProbeSpec::default()),
                &[AssumptionId::A1],
                force,
            )?;
            let r = simulate_and_estimate(&model, &scheme, cfg.scheme.method, seed).map_err(|e| numerical(&e))?;
            let row = EstimateRow::new(Some(seed), scheme.n(), scheme.alpha(), Some(cfg.scheme.method), &r);
            (row, json!({"simulated": true}))
        }
    };
    let doc = json!({
        "command": "estimate",
        "config": cfg.to_json(),
        "source": source,
        "result": row,
    });
    emit(
        out,
        format_args!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable")),
    )?;
    if let Some(dir) = &cfg.io.out_dir {
        if cfg.io.wants(Format::Csv) {
            output::write_estimate_csv(dir, &provenance("estimate", cfg, Some(&model)), &row)?;
        }
        if cfg.io.wants(Format::Json) {
            output::write_json(dir, "estimate.json", &doc)?;
        }
    }
    Ok(())
}

pub fn experiment(cfg: &RunConfig, force: bool, out: Out) -> Result<(), CliError> {
    let model = cfg.model()?;
    let exp = cfg.experiment(&model.fingerprint())?;
    let dir = cfg.out_dir()?;
    let report = check_assumptions(&model, ProbeSpec::default());
    gate(&report, &blocking(), force)?;
    let outcome = run_experiment_with(&exp, Execution::Parallel).map_err(mc_error)?;
    write_experiment(
        dir,
        "experiment",
        cfg,
        &model,
        &report,
        &outcome,
        "replicates.csv",
        "summary.json",
    )?;
    for c in &outcome.cells {
        emit(
            out,
            format_args!(
                "n = {:>6}  alpha = {:<4}  mean = {:.5}  std = {:.5}  failures = {}\n",
                c.n, c.alpha, c.mean_theta_hat, c.std_theta_hat, c.failures
            ),
        )?;
    }
    emit(out, format_args!("wrote {}\n", dir.display()))
}

pub(crate) fn mc_error(e: McError) -> CliError {
    match e {
        McError::InvalidConfig(msg) => CliError::config("experiment", msg),
        other => CliError::Numerical(other.to_string()),
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn write_experiment(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    model: &DiffusionModel,
    report: &AssumptionReport,
    outcome: &driftmle::ExperimentOutcome,
    csv_name: &str,
    json_name: &str,
) -> Result<(), CliError> {
    if cfg.io.wants(Format::Csv) {
        output::write_replicates_csv(
            dir,
            csv_name,
            &provenance(command, cfg, Some(model)),
            &outcome.replicates,
        )?;
    }
    if cfg.io.wants(Format::Json) {
        let summary = json!({
            "command": command,
            "config": cfg.to_json(),
            "version": env!("CARGO_PKG_VERSION"),
            "generator": GENERATOR_ID,
            "fingerprint": model.fingerprint(),
            "assumptions": report,
            "info": outcome.info,
            "cells": outcome.cells,
        });
        output::write_json(dir, json_name, &summary)?;
    }
    output::write_json(dir, "config.json", &cfg.to_json())?;
    Ok(())
}
