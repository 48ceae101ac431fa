//! Artifact writing. Every file goes to a temporary name in the target
//! directory first and is renamed into place once complete.

use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use driftmle::mc::ReplicateRecord;
use driftmle::EstimateResult;
use driftmle::Method;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::CliError;

pub fn write_atomic<F>(dir: &Path, name: &str, fill: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let target = dir.join(name);
    let tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        fill(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io(&target, e))?;
    }
    tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
    Ok(target)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    write_atomic(dir, name, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

/// `# key=value` lines ahead of a CSV header.
fn write_comments(out: &mut dyn Write, meta: &[(&str, String)]) -> io::Result<()> {
    for (key, value) in meta {
        writeln!(out, "# {key}={value}")?;
    }
    Ok(())
}

pub fn write_replicates_csv(
    dir: &Path,
    name: &str,
    meta: &[(&str, String)],
    records: &[ReplicateRecord],
) -> Result<PathBuf, CliError> {
    write_atomic(dir, name, |out| {
        write_comments(out, meta)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        for r in records {
            w.serialize(r)?;
        }
        w.flush()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub seed: Option<u64>,
    pub n: u64,
    pub alpha: f64,
    pub method: Option<Method>,
    pub theta_hat: f64,
    #[serde(rename = "Dn")]
    pub dn: f64,
    #[serde(rename = "N_used")]
    pub n_used: u64,
}

impl EstimateRow {
    pub fn new(seed: Option<u64>, n: u64, alpha: f64, method: Option<Method>, r: &EstimateResult) -> Self {
        Self {
            seed,
            n,
            alpha,
            method,
            theta_hat: r.theta_hat,
            dn: r.denominator_dn,
            n_used: r.n_used,
        }
    }
}

pub fn write_estimate_csv(dir: &Path, meta: &[(&str, String)], row: &EstimateRow) -> Result<PathBuf, CliError> {
    write_atomic(dir, "estimate.csv", |out| {
        write_comments(out, meta)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.serialize(row)?;
        w.flush()
    })
}
