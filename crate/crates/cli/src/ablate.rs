//! The six named ablations: variant definitions, execution over seeds and
//! result tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use anyhow::{bail, Result};
use clap::ValueEnum;
use featspace::analyzer::count_params;
use featspace::netspec::builtin_design;
use featspace::optim::{DecayPolicy, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::{DataSource, Dataset};
use crate::reference::{self, Reference};
use crate::report::{mean_std, Table};
use crate::runfile::{RunFile, Scale};
use crate::train::{self, RunLabels, RunRecord, CONFIG_FILE, SUMMARY_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum AblationName {
    Designs,
    ConvVsPool,
    Regularization,
    LrPolicy,
    ReductionRate,
    Depth,
}

impl AblationName {
    pub const ALL: [AblationName; 6] = [
        AblationName::Designs,
        AblationName::ConvVsPool,
        AblationName::Regularization,
        AblationName::LrPolicy,
        AblationName::ReductionRate,
        AblationName::Depth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationName::Designs => "designs",
            AblationName::ConvVsPool => "conv_vs_pool",
            AblationName::Regularization => "regularization",
            AblationName::LrPolicy => "lr_policy",
            AblationName::ReductionRate => "reduction_rate",
            AblationName::Depth => "depth",
        }
    }
}

/// Training-configuration change applied on top of the scale defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tweak {
    None,
    NoBatchNorm,
    NoDropout,
    StepPolicy,
}

impl Tweak {
    /// Directory-name suffix; runs sharing a design and tweak are reused
    /// across ablations.
    pub fn key(self) -> &'static str {
        match self {
            Tweak::None => "base",
            Tweak::NoBatchNorm => "no_bn",
            Tweak::NoDropout => "no_dropout",
            Tweak::StepPolicy => "step",
        }
    }

    pub fn apply(self, cfg: &mut TrainConfig) {
        match self {
            Tweak::None => {}
            Tweak::NoBatchNorm => cfg.batch_norm = false,
            Tweak::NoDropout => cfg.dropout = false,
            Tweak::StepPolicy => {
                cfg.policy = DecayPolicy::step(cfg.policy.lambda0, STEP_GAMMA, 0);
            }
        }
    }
}

/// Decay factor of the step policy; its step is a third of the run.
pub const STEP_GAMMA: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Variant {
    pub model: &'static str,
    /// One cell per extra column of the ablation.
    pub cells: Vec<&'static str>,
    pub design: &'static str,
    pub tweak: Tweak,
    pub reference: Reference,
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub name: AblationName,
    pub title: &'static str,
    /// Headers of the columns between the model name and the numbers.
    pub columns: Vec<&'static str>,
    pub variants: Vec<Variant>,
}

fn v(
    model: &'static str,
    cells: &[&'static str],
    design: &'static str,
    tweak: Tweak,
    reference: Reference,
) -> Variant {
    Variant {
        model,
        cells: cells.to_vec(),
        design,
        tweak,
        reference,
    }
}

pub fn ablation(name: AblationName) -> Ablation {
    use Tweak::None as Base;
    let (title, columns, variants) = match name {
        AblationName::Designs => (
            "Results of 3 main designs",
            vec![],
            vec![
                v("design 1", &[], "design1", Base, reference::DESIGN1),
                v("design 2", &[], "design2", Base, reference::DESIGN2),
                v("design 3", &[], "design3", Base, reference::DESIGN3),
            ],
        ),
        AblationName::ConvVsPool => (
            "Convolution vs max pooling",
            vec![],
            vec![
                v("design 1_conv", &[], "design1_conv", Base, reference::DESIGN1_CONV),
                v("design 1 (max_pooling)", &[], "design1", Base, reference::DESIGN1),
            ],
        ),
        AblationName::Regularization => (
            "Explicit regularization",
            vec!["dropout", "batch_norm"],
            vec![
                v("design 1_conv", &["yes", "yes"], "design1_conv", Base, reference::DESIGN1_CONV),
                v(
                    "design 1_conv",
                    &["yes", "no"],
                    "design1_conv",
                    Tweak::NoBatchNorm,
                    reference::DESIGN1_CONV_NO_BN,
                ),
                v(
                    "design 1_conv",
                    &["no", "yes"],
                    "design1_conv",
                    Tweak::NoDropout,
                    reference::DESIGN1_CONV_NO_DROPOUT,
                ),
            ],
        ),
        AblationName::LrPolicy => (
            "Learning rate decay policy",
            vec!["policy"],
            vec![
                v("design 1_conv", &["polynomial"], "design1_conv", Base, reference::DESIGN1_CONV),
                v(
                    "design 1_conv",
                    &["step"],
                    "design1_conv",
                    Tweak::StepPolicy,
                    reference::DESIGN1_CONV_STEP,
                ),
            ],
        ),
        AblationName::ReductionRate => (
            "Rate of reduction",
            vec!["first_layer_stride"],
            vec![
                v("design 1_conv", &["no"], "design1_conv", Base, reference::DESIGN1_CONV),
                v(
                    "design 1_conv_stride",
                    &["yes"],
                    "design1_conv_stride",
                    Base,
                    reference::DESIGN1_CONV_STRIDE,
                ),
            ],
        ),
        AblationName::Depth => (
            "Depth",
            vec![],
            vec![
                v("design 1_conv", &[], "design1_conv", Base, reference::DESIGN1_CONV),
                v("design 4", &[], "design4", Base, reference::DESIGN4),
            ],
        ),
    };
    Ablation {
        name,
        title,
        columns,
        variants,
    }
}

#[derive(Debug, Clone)]
pub struct AblationOptions {
    pub scale: Scale,
    pub seeds: Vec<u64>,
    pub source: DataSource,
    /// Root directory; runs go to `<output>/runs/<design>-<tweak>/seed<N>`.
    pub output: PathBuf,
    /// Seed replicas trained concurrently.
    pub parallel_seeds: usize,
    pub epochs: Option<usize>,
    pub train_images: Option<usize>,
    pub test_images: Option<usize>,
    pub deterministic: bool,
}

impl AblationOptions {
    pub fn new(scale: Scale, seeds: Vec<u64>, source: DataSource, output: PathBuf) -> Self {
        Self {
            scale,
            seeds,
            source,
            output,
            parallel_seeds: 1,
            epochs: None,
            train_images: None,
            test_images: None,
            deterministic: true,
        }
    }

    /// The train and test images every variant of a run shares.
    pub fn load_data(&self) -> Result<Dataset> {
        self.source.load(
            self.train_images.unwrap_or(self.scale.train_images()),
            self.test_images.unwrap_or(self.scale.test_images()),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("seed list is empty");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            bail!("seed list contains duplicates");
        }
        if self.parallel_seeds == 0 {
            bail!("--parallel-seeds must be >= 1");
        }
        Ok(())
    }

    /// The run file of one (variant, seed) pair.
    pub fn runfile(&self, variant: &Variant, seed: u64) -> RunFile {
        let mut rf = RunFile::for_design(variant.design, self.scale);
        rf.synthetic = self.source == DataSource::Synthetic;
        if let DataSource::Cifar(dir) = &self.source {
            rf.dataset = Some(dir.clone());
        }
        rf.train_images = Some(self.train_images.unwrap_or(self.scale.train_images()));
        rf.test_images = Some(self.test_images.unwrap_or(self.scale.test_images()));
        rf.deterministic = self.deterministic;
        rf.output = self
            .output
            .join("runs")
            .join(format!("{}-{}", variant.design, variant.tweak.key()))
            .join(format!("seed{seed}"));
        let cfg = rf.train.as_mut().expect("for_design sets a config");
        cfg.seed = seed;
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        variant.tweak.apply(cfg);
        rf
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub variant: String,
    pub design: String,
    /// Parameters of the trained (scaled) network, in thousands.
    pub params_k: usize,
    /// Parameters of the full-width network, in thousands.
    pub params_k_full: usize,
    /// Mean test accuracy in [0, 1] over the successful seeds.
    pub mean_test_acc: Option<f64>,
    pub std: Option<f64>,
    pub seeds: Vec<u64>,
    pub test_accs: Vec<Option<f64>>,
    pub failures: Vec<String>,
    pub reference_params_k: Option<u32>,
    pub reference_test_acc: f64,
}

impl AblationRow {
    pub fn failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub name: AblationName,
    pub title: String,
    pub scale: Scale,
    pub columns: Vec<String>,
    pub rows: Vec<AblationRow>,
}

/// Trains every variant for every seed. Runs whose output directory holds
/// a successful summary produced by an identical configuration are reused.
/// A failing run marks its row instead of aborting the ablation.
pub fn run_ablation(name: AblationName, opts: &AblationOptions) -> Result<AblationResult> {
    opts.validate()?;
    let ab = ablation(name);
    let data = opts.load_data()?;

    let rows = ab
        .variants
        .iter()
        .map(|variant| run_variant(variant, opts, &data))
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationResult {
        name,
        title: ab.title.to_string(),
        scale: opts.scale,
        columns: ab.columns.iter().map(|c| c.to_string()).collect(),
        rows,
    })
}

/// Trains one variant for every seed of `opts` on preloaded `data`.
pub fn run_variant(variant: &Variant, opts: &AblationOptions, data: &Dataset) -> Result<AblationRow> {
    opts.validate()?;
    let base = builtin_design(variant.design)?;
    let scaled = base.scaled(opts.scale.divisor())?;
    let labels = RunLabels {
        model: Some(variant.model.to_string()),
        variant: variant.cells.join(" / "),
    };
    let outcomes = run_seeds(opts, variant, &labels, data);
    let mut accs = Vec::new();
    let mut failures = Vec::new();
    for (seed, outcome) in opts.seeds.iter().zip(outcomes) {
        match outcome {
            Ok(rec) => accs.push(rec.summary.final_test_acc),
            Err(e) => {
                log::error!("{} seed {seed}: {e:#}", variant.model);
                failures.push(format!("seed {seed}: {e:#}"));
                accs.push(None);
            }
        }
    }
    let ok: Vec<f64> = accs.iter().flatten().copied().collect();
    let (mean, std) = match mean_std(&ok) {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    Ok(AblationRow {
        model: variant.model.to_string(),
        variant: labels.variant,
        design: variant.design.to_string(),
        params_k: count_params(&scaled)?.total_k(),
        params_k_full: count_params(&base)?.total_k(),
        mean_test_acc: mean,
        std,
        seeds: opts.seeds.clone(),
        test_accs: accs,
        failures,
        reference_params_k: variant.reference.params_k,
        reference_test_acc: variant.reference.test_acc,
    })
}

fn run_seeds(
    opts: &AblationOptions,
    variant: &Variant,
    labels: &RunLabels,
    data: &Dataset,
) -> Vec<Result<RunRecord>> {
    let one = |seed: u64| -> Result<RunRecord> {
        let rf = opts.runfile(variant, seed);
        if let Some(rec) = cached(&rf, labels)? {
            log::info!("reusing {}", rf.output.display());
            return Ok(rec);
        }
        train::run_with_data(&rf, data, labels)
    };
    let mut out = Vec::with_capacity(opts.seeds.len());
    for chunk in opts.seeds.chunks(opts.parallel_seeds) {
        if chunk.len() == 1 {
            out.push(one(chunk[0]));
            continue;
        }
        thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|&seed| s.spawn(move || one(seed))).collect();
            for h in handles {
                out.push(h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("training thread panicked"))));
            }
        });
    }
    out
}

/// A previous successful run of exactly this configuration, relabelled.
fn cached(rf: &RunFile, labels: &RunLabels) -> Result<Option<RunRecord>> {
    let summary = rf.output.join(SUMMARY_FILE);
    let config = rf.output.join(CONFIG_FILE);
    if !summary.is_file() || !config.is_file() {
        return Ok(None);
    }
    let stored = RunFile::parse(&fs::read_to_string(&config)?)?;
    let mut expected = rf.clone();
    expected.train_images = Some(rf.train_images());
    expected.test_images = Some(rf.test_images());
    expected.train = Some(rf.train_config());
    if stored != expected {
        return Ok(None);
    }
    let mut rec = RunRecord::load(&summary)?;
    if rec.error.is_some() {
        return Ok(None);
    }
    rec.model = labels.model.clone().unwrap_or(rec.model);
    rec.variant = labels.variant.clone();
    Ok(Some(rec))
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{:.1}", 100.0 * v))
}

impl AblationResult {
    fn table(&self) -> Table {
        let mut header = vec!["Model".to_string()];
        header.extend(self.columns.iter().cloned());
        header.extend(
            [
                "#params(K) full",
                "#params(K) run",
                "test_accuracy (%)",
                "std",
                "seeds",
                "reference #params(K)",
                "reference test_accuracy (%)",
            ]
            .map(String::from),
        );
        let mut t = Table::new(header);
        for r in &self.rows {
            let mut cells = vec![r.model.clone()];
            if !self.columns.is_empty() {
                cells.extend(r.variant.split(" / ").map(String::from));
            }
            let acc = if r.failed() {
                format!("FAILED ({}/{})", r.failures.len(), r.seeds.len())
            } else {
                pct(r.mean_test_acc)
            };
            cells.extend([
                r.params_k_full.to_string(),
                r.params_k.to_string(),
                acc,
                pct(r.std),
                r.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
                r.reference_params_k.map_or_else(|| "-".into(), |k| k.to_string()),
                format!("{:.1}", r.reference_test_acc),
            ]);
            t.push(cells);
        }
        t
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("### {} ({}, scale {})\n\n", self.title, self.name.name(), self.scale.name());
        out.push_str(&self.table().to_markdown());
        let failures: Vec<_> = self.rows.iter().flat_map(|r| r.failures.iter().map(move |f| (r, f))).collect();
        if !failures.is_empty() {
            out.push('\n');
            for (r, f) in failures {
                let _ = writeln!(out, "- {} {}: {f}", r.model, r.variant);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        self.table().to_csv()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result is always serializable")
    }

    /// Writes `ablation.{md,csv,json}` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("ablation.md"), self.to_markdown())?;
        fs::write(dir.join("ablation.csv"), self.to_csv())?;
        fs::write(dir.join("ablation.json"), self.to_json() + "\n")?;
        Ok(())
    }

    /// Mean accuracy of the row whose model and variant match.
    pub fn mean_of(&self, model: &str, variant: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.variant == variant)
            .and_then(|r| r.mean_test_acc)
    }
}
