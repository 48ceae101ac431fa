//! Run configuration: the JSON file, flag overrides and per-command checks.

use std::path::{Path, PathBuf};

use driftmle::{DiffusionModel, ExperimentConfig, Method, ObservationScheme};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub io: IoSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub a: String,
    pub b: String,
    pub theta: f64,
    pub x0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "one")]
    pub substeps: u32,
    #[serde(default = "milstein")]
    pub method: Method,
}

fn one() -> u32 {
    1
}

fn milstein() -> Method {
    Method::Milstein
}

impl Default for SchemeSpec {
    fn default() -> Self {
        Self {
            n: None,
            alpha: None,
            substeps: 1,
            method: Method::Milstein,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for IoSpec {
    fn default() -> Self {
        Self {
            out_dir: None,
            formats: all_formats(),
        }
    }
}

impl IoSpec {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n: Option<u64>,
    pub alpha: Option<f64>,
    pub replicates: Option<u32>,
    pub method: Option<Method>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Parses the config, reporting errors with the dotted field path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "config".to_string() } else { path };
            CliError::config(field, e.into_inner())
        })
    }

    /// `--n` and `--alpha` set both the single-path scheme and a one-cell
    /// experiment grid.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.experiment.master_seed = Some(seed);
        }
        if let Some(n) = o.n {
            self.scheme.n = Some(n);
            self.experiment.ns = Some(vec![n]);
        }
        if let Some(alpha) = o.alpha {
            self.scheme.alpha = Some(alpha);
            self.experiment.alphas = Some(vec![alpha]);
        }
        if let Some(r) = o.replicates {
            self.experiment.replicates = Some(r);
        }
        if let Some(m) = o.method {
            self.scheme.method = m;
        }
        if let Some(out) = &o.out {
            self.io.out_dir = Some(out.clone());
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn model(&self) -> Result<DiffusionModel, CliError> {
        let spec = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::config("model", "required"))?;
        let a = driftmle::parse(&spec.a).map_err(|e| CliError::config("model.a", e))?;
        let b = driftmle::parse(&spec.b).map_err(|e| CliError::config("model.b", e))?;
        if !spec.theta.is_finite() {
            return Err(CliError::config("model.theta", "must be finite"));
        }
        if !spec.x0.is_finite() {
            return Err(CliError::config("model.x0", "must be finite"));
        }
        DiffusionModel::new(a, b, spec.theta, spec.x0).map_err(|e| CliError::config("model", e))
    }

    pub fn scheme(&self) -> Result<ObservationScheme, CliError> {
        let n = self.scheme.n.ok_or_else(|| CliError::config("scheme.n", "required"))?;
        let alpha = self
            .scheme
            .alpha
            .ok_or_else(|| CliError::config("scheme.alpha", "required"))?;
        ObservationScheme::new(n, alpha, self.scheme.substeps).map_err(|e| CliError::config("scheme", e))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.experiment
            .master_seed
            .ok_or_else(|| CliError::config("experiment.master_seed", "required (or pass --seed)"))
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.io
            .out_dir
            .as_deref()
            .ok_or_else(|| CliError::config("io.out_dir", "required (or pass --out)"))
    }

    pub fn experiment(&self, label: &str) -> Result<ExperimentConfig, CliError> {
        let cfg = ExperimentConfig {
            label: label.to_string(),
            model: self.model()?,
            alphas: self
                .experiment
                .alphas
                .clone()
                .ok_or_else(|| CliError::config("experiment.alphas", "required"))?,
            ns: self
                .experiment
                .ns
                .clone()
                .ok_or_else(|| CliError::config("experiment.ns", "required"))?,
            replicates: self
                .experiment
                .replicates
                .ok_or_else(|| CliError::config("experiment.replicates", "required"))?,
            method: self.scheme.method,
            master_seed: self.seed()?,
            substeps: self.scheme.substeps,
        };
        cfg.validate().map_err(|e| CliError::config("experiment", e))?;
        Ok(cfg)
    }
}
