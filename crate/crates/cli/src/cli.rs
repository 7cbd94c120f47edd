use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use featspace::netspec::{builtin_design, render_spec, BUILTIN_DESIGNS};

use crate::ablate::{run_ablation, AblationName, AblationOptions};
use crate::analyze::{cmd_analyze, InfoOptions};
use crate::dataset::DataSource;
use crate::report::report_dir;
use crate::runfile::{resolve_spec, RunFile, Scale};
use crate::train::{self, RunLabels};

#[derive(Debug, Parser)]
#[command(name = "featspace", version, about = "Compositional CNN design lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    /// Parses an argument list whose first item is the program name.
    pub fn from_args<I, T>(args: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        Ok(<Self as Parser>::try_parse_from(args)?)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parameter counts, shapes, receptive fields, reduction lints and
    /// capacity expressions of a network.
    Analyze(AnalyzeArgs),
    /// Train the network described by a run file.
    Train(TrainArgs),
    /// Run one of the named ablations over several seeds.
    Ablate(AblateArgs),
    /// Aggregate every run below a directory into one table.
    Report(ReportArgs),
    /// List the builtin designs or export them as spec files.
    Designs(DesignsArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Builtin design name or path to a spec file.
    pub spec: String,
    #[arg(long)]
    pub json: bool,
    /// Exit with status 1 when an error lint fires.
    #[arg(long)]
    pub strict: bool,
    /// Divide channel widths by the scale's divisor first.
    #[arg(long, value_enum, default_value_t = Scale::Full)]
    pub scale: Scale,
    /// Also measure information statistics at every reduction block of a
    /// randomly initialized model.
    #[arg(long)]
    pub info: bool,
    #[arg(long, default_value_t = 64)]
    pub info_batch: usize,
    #[arg(long, default_value_t = 16)]
    pub sample_dims: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub runfile: PathBuf,
    /// Use generated images instead of CIFAR-10.
    #[arg(long)]
    pub synthetic: bool,
    /// Require reproducible execution. Training is single-threaded, so
    /// runs are always reproducible; the flag is recorded in the config.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Overrides the run file's output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Overrides the run file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(value_enum)]
    pub name: AblationName,
    #[arg(long, value_enum, default_value_t = Scale::Small)]
    pub scale: Scale,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value = "runs/ablations")]
    pub output: PathBuf,
    /// Seed replicas trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub parallel_seeds: usize,
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub train_images: Option<usize>,
    #[arg(long)]
    pub test_images: Option<usize>,
    /// Print JSON instead of markdown.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub dir: PathBuf,
    #[arg(long, conflicts_with = "json")]
    pub csv: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DesignsArgs {
    /// Write `<name>.spec` for every builtin into this directory.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

/// Runs a parsed command, writing results to `out`. Returns the exit status.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Analyze(a) => {
            let spec = resolve_spec(&a.spec)?.scaled(a.scale.divisor())?;
            let info = a.info.then(|| InfoOptions {
                batch: a.info_batch,
                sample_dims: a.sample_dims,
                seed: a.seed,
            });
            let res = cmd_analyze(&spec, info.as_ref())?;
            writeln!(out, "{}", res.render(a.json).trim_end())?;
            Ok(res.exit_code(a.strict))
        }
        Command::Train(t) => {
            let mut rf = RunFile::load(&t.runfile)?;
            if t.synthetic {
                rf.synthetic = true;
            }
            if t.deterministic {
                rf.deterministic = true;
            }
            if t.dataset.is_some() {
                rf.dataset = t.dataset;
            }
            if let Some(o) = t.output {
                rf.output = o;
            }
            if t.seed.is_some() || t.epochs.is_some() {
                let mut cfg = rf.train_config();
                cfg.seed = t.seed.unwrap_or(cfg.seed);
                cfg.epochs = t.epochs.unwrap_or(cfg.epochs);
                rf.train = Some(cfg);
            }
            let rec = train::run(&rf, &RunLabels::default())?;
            writeln!(
                out,
                "{}: final test accuracy {} after {} iterations; outputs in {}",
                rec.network,
                rec.summary
                    .final_test_acc
                    .map_or_else(|| "-".into(), |a| format!("{:.2}%", 100.0 * a)),
                rec.summary.iterations,
                rf.output.display()
            )?;
            Ok(0)
        }
        Command::Ablate(a) => {
            if a.scale == Scale::Tiny && !a.synthetic {
                bail!("tiny scale runs on synthetic data only; pass --synthetic");
            }
            let source = DataSource::resolve(a.synthetic, a.dataset.as_deref())?;
            let dir = a.output.join(a.name.name());
            let mut opts = AblationOptions::new(a.scale, a.seeds, source, dir.clone());
            opts.parallel_seeds = a.parallel_seeds;
            opts.deterministic = true;
            opts.epochs = a.epochs;
            opts.train_images = a.train_images;
            opts.test_images = a.test_images;
            let res = run_ablation(a.name, &opts)?;
            res.write(&dir)?;
            let text = if a.json { res.to_json() } else { res.to_markdown() };
            writeln!(out, "{}", text.trim_end())?;
            Ok(i32::from(res.rows.iter().any(|r| r.failed())))
        }
        Command::Report(r) => {
            if !r.dir.is_dir() {
                bail!("{} is not a directory", r.dir.display());
            }
            let rep = report_dir(&r.dir)?;
            let text = if r.json {
                rep.to_json()
            } else if r.csv {
                rep.to_csv()
            } else {
                rep.to_markdown()
            };
            write!(out, "{text}")?;
            Ok(0)
        }
        Command::Designs(d) => {
            match d.export {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    for name in BUILTIN_DESIGNS {
                        let path = dir.join(format!("{name}.spec"));
                        fs::write(&path, render_spec(&builtin_design(name)?))
                            .with_context(|| format!("writing {}", path.display()))?;
                        writeln!(out, "{}", path.display())?;
                    }
                }
                None => {
                    for name in BUILTIN_DESIGNS {
                        writeln!(out, "{name}")?;
                    }
                }
            }
            Ok(0)
        }
    }
}
