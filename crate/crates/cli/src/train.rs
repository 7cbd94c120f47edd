use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use featspace::analyzer::count_params;
use featspace::data::derived_rng;
use featspace::netspec::build_model;
use featspace::optim::{total_iterations, train, MetricsLog, RunSummary, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::{DataSource, Dataset};
use crate::runfile::{RunFile, Scale};

/// Random stream used for weight initialization.
const INIT_STREAM: u64 = 0x1_417;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Display name of the model, e.g. `design 1_conv`.
    pub model: String,
    /// Variant label within an ablation; empty for plain runs.
    #[serde(default)]
    pub variant: String,
    /// Name of the network actually trained (includes the width divisor).
    pub network: String,
    pub scale: Scale,
    pub seed: u64,
    pub params: usize,
    pub params_k: usize,
    pub data: String,
    pub train_images: usize,
    pub test_images: usize,
    #[serde(flatten)]
    pub summary: RunSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Labels written into a run's summary.
#[derive(Debug, Clone, Default)]
pub struct RunLabels {
    pub model: Option<String>,
    pub variant: String,
}

/// Loads the run's data and trains it. See [`run_with_data`].
pub fn run(rf: &RunFile, labels: &RunLabels) -> Result<RunRecord> {
    rf.check_paths()?;
    let source = DataSource::resolve(rf.synthetic, rf.dataset.as_deref())?;
    let data = source.load(rf.train_images(), rf.test_images())?;
    run_with_data(rf, &data, labels)
}

/// Trains the run file's network on `data` and writes `metrics.csv`,
/// `summary.json` and a resolved `config.toml` into the output directory.
/// A diverged run still writes its summary (with the error) before
/// returning the error.
pub fn run_with_data(rf: &RunFile, data: &Dataset, labels: &RunLabels) -> Result<RunRecord> {
    let spec = rf.spec()?;
    let config = rf.train_config();
    config.validate()?;
    let params = count_params(&spec)?;
    fs::create_dir_all(&rf.output)
        .with_context(|| format!("creating {}", rf.output.display()))?;
    fs::write(rf.output.join(CONFIG_FILE), snapshot(rf, &config)?)?;

    let mut model = build_model(&spec, &mut derived_rng(config.seed ^ INIT_STREAM, 0), config.build_options())?;
    log::info!(
        "training {} ({} params) on {} train / {} test images from {}",
        spec.name,
        params.total,
        data.train.len(),
        data.test.len(),
        data.source
    );
    let started = Instant::now();
    let outcome = train(&mut model, &data.train, &data.test, &config);
    log::info!("{} finished in {:.1}s", spec.name, started.elapsed().as_secs_f64());

    let iterations = total_iterations(&config, data.train.len());
    let (log, error) = match outcome {
        Ok(log) => (log, None),
        Err(e) => (MetricsLog::default(), Some(e)),
    };
    let record = RunRecord {
        model: labels.model.clone().unwrap_or_else(|| rf.base_spec().map(|s| s.name).unwrap_or_default()),
        variant: labels.variant.clone(),
        network: spec.name.clone(),
        scale: rf.scale,
        seed: config.seed,
        params: params.total,
        params_k: params.total_k(),
        data: data.source.clone(),
        train_images: data.train.len(),
        test_images: data.test.len(),
        summary: log.summary(if error.is_some() { 0 } else { iterations }),
        error: error.as_ref().map(ToString::to_string),
    };
    log.write_csv(&rf.output.join(METRICS_FILE))?;
    fs::write(rf.output.join(SUMMARY_FILE), serde_json::to_string_pretty(&record)? + "\n")?;
    match error {
        Some(e) => Err(e.into()),
        None => Ok(record),
    }
}

/// The run file as executed: scale defaults filled in.
fn snapshot(rf: &RunFile, config: &TrainConfig) -> Result<String> {
    let mut resolved = rf.clone();
    resolved.train = Some(config.clone());
    resolved.train_images = Some(rf.train_images());
    resolved.test_images = Some(rf.test_images());
    resolved.to_toml()
}
