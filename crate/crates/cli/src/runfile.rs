//! Run files: TOML documents describing one training run.
//!
//! ```toml
//! design = "design1_conv"      # builtin name, or
//! # spec = "designs/custom.spec"
//! scale = "small"              # full | small | tiny
//! dataset = "/data/cifar-10-batches-bin"
//! synthetic = false
//! output = "runs/design1_conv"
//! deterministic = true
//!
//! [train]
//! epochs = 20
//! batch_size = 128
//! seed = 1
//!
//! [train.policy]
//! kind = "poly"
//! lambda0 = 0.05
//! c = 1.0
//! ```
//!
//! Relative paths resolve against the run file's directory. Omitted
//! `[train]` fields take the scale defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use featspace::netspec::{builtin_design, parse_spec, NetSpec};
use featspace::optim::TrainConfig;
use serde::{Deserialize, Serialize};

/// Width divisor and data budget of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    #[default]
    Small,
    /// CI smoke runs on synthetic data.
    Tiny,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Full => "full",
            Scale::Small => "small",
            Scale::Tiny => "tiny",
        }
    }

    pub fn divisor(self) -> usize {
        match self {
            Scale::Full => 1,
            Scale::Small => 4,
            Scale::Tiny => 8,
        }
    }

    pub fn train_images(self) -> usize {
        match self {
            Scale::Full => 50_000,
            Scale::Small => 10_000,
            Scale::Tiny => 256,
        }
    }

    pub fn test_images(self) -> usize {
        match self {
            Scale::Full => 10_000,
            Scale::Small => 2_000,
            Scale::Tiny => 128,
        }
    }

    pub fn epochs(self) -> usize {
        match self {
            Scale::Full | Scale::Small => 20,
            Scale::Tiny => 2,
        }
    }

    /// Default training configuration at this scale.
    pub fn train_config(self) -> TrainConfig {
        let mut cfg = TrainConfig {
            epochs: self.epochs(),
            ..TrainConfig::default()
        };
        if self == Scale::Tiny {
            cfg.batch_size = 32;
            cfg.eval_batch = 64;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    #[serde(default)]
    pub scale: Scale,
    /// CIFAR-10 binary directory; falls back to the environment variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_images: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_images: Option<usize>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/latest")
}

fn default_true() -> bool {
    true
}

impl RunFile {
    pub fn for_design(design: &str, scale: Scale) -> Self {
        Self {
            design: Some(design.to_string()),
            spec: None,
            scale,
            dataset: None,
            synthetic: scale == Scale::Tiny,
            train_images: None,
            test_images: None,
            output: default_output(),
            deterministic: true,
            train: Some(scale.train_config()),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).context("invalid run file")?;
        let scale: Scale = match doc.get("scale") {
            Some(v) => v.clone().try_into().context("invalid scale")?,
            None => Scale::default(),
        };
        if let Some(toml::Value::Table(over)) = doc.remove("train") {
            let toml::Value::Table(mut base) = toml::Value::try_from(scale.train_config())? else {
                unreachable!("a struct serializes to a table")
            };
            merge(&mut base, over);
            doc.insert("train".into(), toml::Value::Table(base));
        }
        let rf: RunFile = doc.try_into().context("invalid run file")?;
        rf.check_source()?;
        Ok(rf)
    }

    /// Reads a run file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut rf = Self::parse(&text).with_context(|| path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = rf.spec.as_mut() {
            resolve(p);
        }
        if let Some(p) = rf.dataset.as_mut() {
            resolve(p);
        }
        resolve(&mut rf.output);
        Ok(rf)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn check_source(&self) -> Result<()> {
        match (&self.design, &self.spec) {
            (Some(_), Some(_)) => bail!("run file sets both 'design' and 'spec'"),
            (None, None) => bail!("run file needs 'design' or 'spec'"),
            _ => Ok(()),
        }
    }

    /// Training configuration with scale defaults filled in.
    pub fn train_config(&self) -> TrainConfig {
        self.train.clone().unwrap_or_else(|| self.scale.train_config())
    }

    pub fn train_images(&self) -> usize {
        self.train_images.unwrap_or(self.scale.train_images())
    }

    pub fn test_images(&self) -> usize {
        self.test_images.unwrap_or(self.scale.test_images())
    }

    /// The full-width network named by the run file.
    pub fn base_spec(&self) -> Result<NetSpec> {
        self.check_source()?;
        match (&self.design, &self.spec) {
            (Some(name), _) => Ok(builtin_design(name)?),
            (_, Some(path)) => load_spec(path),
            _ => unreachable!(),
        }
    }

    /// The network at the run's scale.
    pub fn spec(&self) -> Result<NetSpec> {
        Ok(self.base_spec()?.scaled(self.scale.divisor())?)
    }

    /// Fails when a referenced path is missing.
    pub fn check_paths(&self) -> Result<()> {
        if let Some(p) = &self.spec {
            if !p.is_file() {
                bail!("spec file {} does not exist", p.display());
            }
        }
        if let Some(p) = &self.dataset {
            if !self.synthetic && !p.is_dir() {
                bail!("dataset directory {} does not exist", p.display());
            }
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses a spec file, reporting errors as `path:line: message`.
pub fn load_spec(path: &Path) -> Result<NetSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_spec(&text).map_err(|e| match e {
        featspace::Error::Parse { line, msg } => {
            anyhow::anyhow!("{}:{line}: {msg}", path.display())
        }
        other => anyhow::anyhow!("{}: {other}", path.display()),
    })
}

/// A builtin design name, or a path to a spec file.
pub fn resolve_spec(name_or_path: &str) -> Result<NetSpec> {
    if featspace::netspec::BUILTIN_DESIGNS.contains(&name_or_path) {
        return Ok(builtin_design(name_or_path)?);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load_spec(path);
    }
    bail!(
        "'{name_or_path}' is neither a builtin design ({}) nor a spec file",
        featspace::netspec::BUILTIN_DESIGNS.join(", ")
    )
}
