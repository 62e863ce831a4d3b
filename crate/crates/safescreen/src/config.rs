//! Run configuration: `key = value` files merged under command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use safescreen_core::{LossFamily, Penalty, ProblemKind};

use crate::io::Format;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("{key}: {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error("missing required setting {0:?}")]
    Missing(&'static str),
}

pub const KEYS: &[&str] = &[
    "data",
    "format",
    "kind",
    "loss",
    "mu",
    "penalty",
    "lambda",
    "lambda-min",
    "grid",
    "kernel",
    "sigma",
    "steps",
    "radius",
    "init-epochs",
    "max-epochs",
    "tol",
    "seed",
    "out",
    "verify",
    "n",
    "p",
    "sparsity",
    "reps",
    "test-fraction",
];

fn canonical(key: &str) -> String {
    key.trim().replace('_', "-")
}

/// Parses `key = value` lines; `#` starts a comment, later lines win.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                msg: format!("expected key = value, found {line:?}"),
            });
        };
        let key = canonical(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelChoice {
    None,
    Linear,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub format: Format,
    pub kind: ProblemKind,
    pub loss: LossFamily,
    pub mu: f64,
    pub penalty: Penalty,
    pub lambda: f64,
    /// Smallest λ of a path; defaults to `lambda / 100`.
    pub lambda_min: f64,
    pub grid: usize,
    pub kernel: KernelChoice,
    /// Gaussian bandwidth; for `gen`, the noise standard deviation.
    pub sigma: f64,
    pub steps: usize,
    /// `None` derives the radius from the duality gap.
    pub radius: Option<f64>,
    pub init_epochs: usize,
    pub max_epochs: usize,
    pub tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub verify: bool,
    pub n: usize,
    pub p: usize,
    pub sparsity: usize,
    pub reps: usize,
    pub test_fraction: f64,
}

struct Settings(BTreeMap<String, String>);

impl Settings {
    fn raw(&self, key: &'static str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &'static str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Invalid {
                key,
                msg: format!("{v:?}: {e}"),
            }),
        }
    }

    fn positive(&self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        let v = self.parse(key, default)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(ConfigError::Invalid {
                key,
                msg: format!("must be > 0, got {v}"),
            });
        }
        Ok(v)
    }

    fn at_least_one(&self, key: &'static str, default: usize) -> Result<usize, ConfigError> {
        let v = self.parse(key, default)?;
        if v == 0 {
            return Err(ConfigError::Invalid {
                key,
                msg: "must be ≥ 1".into(),
            });
        }
        Ok(v)
    }
}

fn parse_kind(s: &str) -> Result<ProblemKind, ConfigError> {
    match s {
        "regression" => Ok(ProblemKind::Regression),
        "classification" => Ok(ProblemKind::Classification),
        "interval" => Ok(ProblemKind::Interval),
        other => Err(ConfigError::Invalid {
            key: "kind",
            msg: format!("{other:?} is not regression, classification or interval"),
        }),
    }
}

impl RunConfig {
    /// Resolves settings with `flags` taking precedence over `file`.
    pub fn resolve(
        file: BTreeMap<String, String>,
        flags: BTreeMap<String, String>,
    ) -> Result<Self, ConfigError> {
        let mut merged = file;
        for (k, v) in flags {
            let key = canonical(&k);
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            merged.insert(key, v);
        }
        let s = Settings(merged);

        let kind = s.raw("kind").map_or(Ok(ProblemKind::Regression), parse_kind)?;
        let default_loss = if kind.is_classification() {
            LossFamily::SquaredHinge
        } else {
            LossFamily::ScreeningFriendlyRegression
        };
        let loss = match s.raw("loss") {
            None => default_loss,
            Some(v) => LossFamily::from_name(v).ok_or_else(|| ConfigError::Invalid {
                key: "loss",
                msg: format!("unknown loss {v:?}"),
            })?,
        };
        let penalty = match s.raw("penalty") {
            None => Penalty::L2Sq,
            Some(v) => Penalty::from_name(v).ok_or_else(|| ConfigError::Invalid {
                key: "penalty",
                msg: format!("unknown penalty {v:?} (expected l1 or l2sq)"),
            })?,
        };
        let kernel = match s.raw("kernel") {
            None | Some("none") => KernelChoice::None,
            Some("linear") => KernelChoice::Linear,
            Some("gaussian") => KernelChoice::Gaussian,
            Some(v) => {
                return Err(ConfigError::Invalid {
                    key: "kernel",
                    msg: format!("unknown kernel {v:?} (expected none, linear or gaussian)"),
                })
            }
        };
        let format = s.parse("format", Format::Csv)?;
        let mu: f64 = s.parse("mu", 0.5)?;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(ConfigError::Invalid {
                key: "mu",
                msg: format!("must be ≥ 0, got {mu}"),
            });
        }
        let lambda = s.positive("lambda", 0.01)?;
        let lambda_min = s.positive("lambda-min", lambda / 100.0)?;
        let radius = match s.raw("radius") {
            None => None,
            Some(_) => Some(s.positive("radius", 1.0)?),
        };
        let p = s.at_least_one("p", 20)?;
        let sparsity = s.at_least_one("sparsity", p.min(5))?;
        if sparsity > p {
            return Err(ConfigError::Invalid {
                key: "sparsity",
                msg: format!("must be at most p = {p}, got {sparsity}"),
            });
        }
        let test_fraction: f64 = s.parse("test-fraction", 0.3)?;
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(ConfigError::Invalid {
                key: "test-fraction",
                msg: format!("must be in (0, 1), got {test_fraction}"),
            });
        }
        Ok(RunConfig {
            data: s.raw("data").map(PathBuf::from),
            format,
            kind,
            loss,
            mu,
            penalty,
            lambda,
            lambda_min,
            grid: s.at_least_one("grid", 10)?,
            kernel,
            sigma: s.parse("sigma", if s.raw("kernel").is_some() { 1.0 } else { 0.1 })?,
            steps: s.parse("steps", 10)?,
            radius,
            init_epochs: s.parse("init-epochs", 20)?,
            max_epochs: s.at_least_one("max-epochs", 100_000)?,
            tol: s.positive("tol", 1e-8)?,
            seed: s.parse("seed", 0)?,
            out: PathBuf::from(s.raw("out").unwrap_or(".")),
            verify: s.parse("verify", false)?,
            n: s.at_least_one("n", 200)?,
            p,
            sparsity,
            reps: s.at_least_one("reps", 3)?,
            test_fraction,
        })
    }

    pub fn data_path(&self) -> Result<&PathBuf, ConfigError> {
        self.data.as_ref().ok_or(ConfigError::Missing("data"))
    }

    /// Interval half-width: the interval data are paired with sreg at this μ.
    pub fn interval_halfwidth(&self) -> Option<f64> {
        (self.kind == ProblemKind::Interval).then_some(self.mu)
    }
}
