use anyhow::{bail, Result};
use featspace::analyzer::{analyze, AnalysisReport};
use featspace::data::{derived_rng, preprocess_eval_sized, synthetic_images, CROP};
use featspace::infoloss::{layer_info_report, InfoReport};
use featspace::netspec::{build_model, BuildOptions, NetSpec};
use featspace::tensor::Tensor;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct InfoOptions {
    pub batch: usize,
    pub sample_dims: usize,
    pub seed: u64,
}

impl Default for InfoOptions {
    fn default() -> Self {
        Self {
            batch: 64,
            sample_dims: 16,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeOutput {
    pub analysis: AnalysisReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub info: Option<InfoReport>,
}

impl AnalyzeOutput {
    /// Exit status: 1 when `strict` and an error lint fired.
    pub fn exit_code(&self, strict: bool) -> i32 {
        i32::from(strict && self.analysis.has_errors())
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            return match &self.info {
                None => self.analysis.to_json(),
                Some(_) => serde_json::to_string_pretty(self).expect("always serializable"),
            };
        }
        let mut out = self.analysis.to_table();
        if let Some(info) = &self.info {
            out.push('\n');
            out.push_str(&info.to_table());
        }
        out
    }
}

/// Static analysis of `spec`, plus activation statistics of a randomly
/// initialized model on synthetic images when `info` is set.
pub fn cmd_analyze(spec: &NetSpec, info: Option<&InfoOptions>) -> Result<AnalyzeOutput> {
    let analysis = analyze(spec, None)?;
    let info = match info {
        Some(opts) => Some(info_report(spec, opts)?),
        None => None,
    };
    Ok(AnalyzeOutput { analysis, info })
}

fn info_report(spec: &NetSpec, opts: &InfoOptions) -> Result<InfoReport> {
    let shape = spec.input_shape;
    if shape.c != 3 {
        bail!("activation statistics need RGB input, {} has {} channels", spec.name, shape.c);
    }
    let mut model = build_model::<f32, _>(spec, &mut derived_rng(opts.seed, 0), BuildOptions::default())?;
    let images = synthetic_images(opts.batch, opts.seed)
        .iter()
        .map(|img| preprocess_eval_sized(img, CROP, shape.h, shape.w))
        .collect::<featspace::Result<Vec<_>>>()?;
    let batch = Tensor::stack(&images)?;
    Ok(layer_info_report(spec, &mut model, &batch, opts.sample_dims, opts.seed)?)
}
