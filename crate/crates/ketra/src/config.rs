//! Run configuration: flat key=value text with section prefixes.
//!
//! ```text
//! dataset_dir=datasets/kinship
//! output_dir=runs/kinship-linreg
//! seed=42
//! model.kind=linear_reg
//! model.encoding=transitivity
//! model.rho=1
//! fit.max_iter=100
//! eval.per_slice=10
//! ```
//!
//! Lines starting with `#` are comments. Unknown keys are rejected. CLI
//! `--set key=value` flags override file keys.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::WeightedPolicy;
use crate::models::{CouplingMode, Hyperparams, ModelKind};
use crate::similarity::Encoding;
use crate::solver::FitConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    #[default]
    Uniform,
    Weighted,
    External,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(EvalMode::Uniform),
            "weighted" => Ok(EvalMode::Weighted),
            "external" => Ok(EvalMode::External),
            other => Err(Error::Config(format!(
                "unknown eval mode {other:?} (expected uniform, weighted or external)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub mode: EvalMode,
    /// 0 means auto: 10 below 15k entities, 200 otherwise.
    pub per_slice: usize,
    pub repeats: usize,
    pub test_file: Option<PathBuf>,
    pub weighted_policy: WeightedPolicy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: EvalMode::Uniform,
            per_slice: 0,
            repeats: 5,
            test_file: None,
            weighted_policy: WeightedPolicy::default(),
        }
    }
}

impl EvalConfig {
    pub fn resolve_per_slice(&self, n_entities: usize) -> usize {
        if self.per_slice > 0 {
            self.per_slice
        } else if n_entities < 15_000 {
            10
        } else {
            200
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub model: ModelKind,
    pub encoding: Option<Encoding>,
    pub hyperparams: Hyperparams,
    pub fit: FitConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_dir: PathBuf::new(),
            output_dir: PathBuf::from("ketra-out"),
            seed: 42,
            threads: 0,
            model: ModelKind::Rescal,
            encoding: None,
            hyperparams: Hyperparams::default(),
            fit: FitConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_rho(value: &str) -> Result<f64> {
    if value == "inf" || value == "infinity" {
        return Ok(f64::INFINITY);
    }
    parse_num::<f64>("model.rho", value)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        let mut cfg = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Apply one key=value pair. Rejects unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset_dir" => self.dataset_dir = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse_num(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "model.kind" => self.model = value.parse()?,
            "model.encoding" => self.encoding = Some(value.parse()?),
            "model.p" => {
                let p: usize = parse_num(key, value)?;
                self.hyperparams.p = (p > 0).then_some(p);
            }
            "model.lambda_a" => self.hyperparams.lambda_a = parse_num(key, value)?,
            "model.lambda_r" => self.hyperparams.lambda_r = parse_num(key, value)?,
            "model.lambda_e" => self.hyperparams.lambda_e = parse_num(key, value)?,
            "model.lambda_s" => self.hyperparams.lambda_s = parse_num(key, value)?,
            "model.lambda_a1" => self.hyperparams.lambda_a1 = Some(parse_num(key, value)?),
            "model.lambda_a2" => self.hyperparams.lambda_a2 = Some(parse_num(key, value)?),
            "model.rho" => self.hyperparams.rho = parse_rho(value)?,
            "model.lagrange_step" => self.hyperparams.lagrange_step = parse_num(key, value)?,
            "fit.max_iter" => self.fit.max_iter = parse_num(key, value)?,
            "fit.tol" => self.fit.tol = parse_num(key, value)?,
            "fit.coupling_mode" => self.fit.coupling = value.parse()?,
            "eval.mode" => self.eval.mode = value.parse()?,
            "eval.per_slice" => self.eval.per_slice = parse_num(key, value)?,
            "eval.repeats" => self.eval.repeats = parse_num(key, value)?,
            "eval.test_file" => self.eval.test_file = Some(PathBuf::from(value)),
            "eval.weighted_policy" => self.eval.weighted_policy = value.parse()?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got {pair:?}")))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Cross-field checks shared by every command.
    pub fn validate(&self) -> Result<()> {
        if self.dataset_dir.as_os_str().is_empty() {
            return Err(Error::Config("dataset_dir is required".into()));
        }
        if !self.dataset_dir.exists() {
            return Err(Error::Config(format!(
                "dataset_dir {} does not exist",
                self.dataset_dir.display()
            )));
        }
        self.hyperparams.validate()?;
        self.fit.validate()?;
        if self.model.uses_similarity() && self.encoding.is_none() {
            return Err(Error::Config(format!(
                "model {} requires model.encoding (a similarity matrix is part of its objective)",
                self.model
            )));
        }
        if self.eval.mode != EvalMode::Uniform && self.eval.repeats != 1 {
            // provided test files are fixed, nothing to resample
        }
        if self.eval.mode == EvalMode::External && self.eval.test_file.is_none() {
            return Err(Error::Config(
                "eval.mode=external requires eval.test_file".into(),
            ));
        }
        Ok(())
    }

    /// Resolved key=value lines for the manifest; no timestamps, so reruns
    /// of the same config hash identically.
    pub fn manifest_lines(&self, p_resolved: usize) -> Vec<(String, String)> {
        let h = &self.hyperparams;
        let mut kv = vec![
            ("dataset_dir".into(), self.dataset_dir.display().to_string()),
            ("model.kind".into(), self.model.name().into()),
            (
                "model.encoding".into(),
                self.encoding
                    .map(|e| e.name().to_owned())
                    .unwrap_or_default(),
            ),
            ("model.p".into(), p_resolved.to_string()),
            ("model.lambda_a".into(), format!("{}", h.lambda_a)),
            ("model.lambda_r".into(), format!("{}", h.lambda_r)),
            ("model.lambda_e".into(), format!("{}", h.lambda_e)),
            ("model.lambda_s".into(), format!("{}", h.lambda_s)),
            ("model.lambda_a1".into(), format!("{}", h.lambda_a1())),
            ("model.lambda_a2".into(), format!("{}", h.lambda_a2())),
            (
                "model.rho".into(),
                if h.rho.is_infinite() {
                    "inf".into()
                } else {
                    format!("{}", h.rho)
                },
            ),
            ("model.lagrange_step".into(), format!("{}", h.lagrange_step)),
            ("fit.max_iter".into(), self.fit.max_iter.to_string()),
            ("fit.tol".into(), format!("{}", self.fit.tol)),
            (
                "fit.coupling_mode".into(),
                match self.fit.coupling {
                    CouplingMode::Derived => "derived".into(),
                    CouplingMode::Literal => "literal".into(),
                },
            ),
            ("seed".into(), self.seed.to_string()),
        ];
        kv.sort();
        kv
    }
}
