use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    covariance_of_rows, gaussian_entropy, gaussian_mutual_info, info_loss_proxy, log_det,
    svd_project, JointGaussian,
};
use crate::analyzer::audit_reduction;
use crate::error::{Error, Result};
use crate::netspec::{BlockKind, Layer, Model, NetSpec, Pred, Source};
use crate::tensor::{Element, Mode, Tensor};

/// Information measures across one spatial reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub block: String,
    pub kind: String,
    /// Flattened per-sample sizes before and after the block.
    pub pre_dim: usize,
    pub post_dim: usize,
    /// Empirical Gaussian MI between the sampled coordinates. Serialized
    /// as `null` when unbounded.
    pub mi_nats: f64,
    pub fully_correlated: bool,
    /// A sampled marginal covariance is singular.
    pub degenerate: bool,
    /// `1 / mi_nats`.
    pub info_loss_proxy: f64,
    pub svd_rank: usize,
    pub svd_retention: f64,
    /// MI under the additive model `Y = X + K`, `K ~ N(μ_K, σ_K²·I)`
    /// with `σ_K²` the variance of the block's kernel weights. `None` for
    /// blocks without a kernel.
    pub noise_model_mi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoReport {
    pub batch: usize,
    pub sample_dims: usize,
    pub seed: u64,
    pub blocks: Vec<BlockInfo>,
}

impl InfoReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:<8} {:>8} {:>8} {:>10} {:>10} {:>5} {:>9} {:>11}\n",
            "block", "kind", "pre", "post", "mi_nats", "1/mi", "rank", "retention", "model_mi"
        );
        for b in &self.blocks {
            let mut flags = String::new();
            if b.fully_correlated {
                flags.push_str(" fully-correlated");
            }
            if b.degenerate {
                flags.push_str(" degenerate");
            }
            let model = b
                .noise_model_mi
                .map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            out.push_str(&format!(
                "{:<10} {:<8} {:>8} {:>8} {:>10.4} {:>10.4} {:>5} {:>9.4} {:>11}{}\n",
                b.block,
                b.kind,
                b.pre_dim,
                b.post_dim,
                b.mi_nats,
                b.info_loss_proxy,
                b.svd_rank,
                b.svd_retention,
                model,
                flags
            ));
        }
        out
    }
}

fn flatten<T: Element>(t: &Tensor<T>) -> Result<(usize, usize)> {
    let n = *t
        .shape()
        .first()
        .ok_or_else(|| Error::Shape("activation has rank 0".into()))?;
    Ok((n, t.len() / n))
}

fn pick(seed: u64, dim: usize, count: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, dim, count.min(dim)).into_vec();
    idx.sort_unstable();
    idx
}

/// Measures one pre/post activation pair. `sample_dims` coordinates are
/// drawn from each side (the same ones when the sizes agree);
/// `kernel_var` enables the additive-model column.
pub fn activation_info<T: Element>(
    block: &str,
    kind: &str,
    pre: &Tensor<T>,
    post: &Tensor<T>,
    sample_dims: usize,
    seed: u64,
    kernel_var: Option<f64>,
) -> Result<BlockInfo> {
    let (n, pre_dim) = flatten(pre)?;
    let (n_post, post_dim) = flatten(post)?;
    if n != n_post {
        return Err(Error::Shape(format!("{block}: batch sizes {n} and {n_post} differ")));
    }
    if sample_dims == 0 {
        return Err(Error::Param("sample_dims must be >= 1".into()));
    }
    if n < sample_dims + 2 {
        return Err(Error::Param(format!(
            "batch of {n} is too small for {sample_dims} sampled coordinates (need {})",
            sample_dims + 2
        )));
    }
    let xi = pick(seed, pre_dim, sample_dims);
    let yi = pick(seed, post_dim, sample_dims);
    let (dx, dy) = (xi.len(), yi.len());
    let data = DMatrix::from_fn(n, dx + dy, |r, c| {
        if c < dx {
            pre.data()[r * pre_dim + xi[c]].as_f64()
        } else {
            post.data()[r * post_dim + yi[c - dx]].as_f64()
        }
    });
    let cov = covariance_of_rows(&data)?.cov;
    let joint = JointGaussian::from_joint_cov(&cov, dx)?;
    let mi = gaussian_mutual_info(&joint)?;
    let degenerate =
        gaussian_entropy(joint.x())?.degenerate || gaussian_entropy(joint.y())?.degenerate;

    let cx = joint.x().cov().clone();
    let rank = ((dx as f64 * post_dim as f64 / pre_dim as f64).round() as usize).clamp(1, dx);
    let retention = svd_project(&cx, rank)?.retention;

    let noise_model_mi = match kernel_var {
        Some(var) if var > 0.0 => {
            let shifted = &cx + DMatrix::identity(dx, dx) * var;
            log_det(&shifted).map(|ld| 0.5 * (ld - dx as f64 * var.ln()))
        }
        _ => None,
    };
    Ok(BlockInfo {
        block: block.to_string(),
        kind: kind.to_string(),
        pre_dim,
        post_dim,
        mi_nats: mi.nats,
        fully_correlated: mi.fully_correlated,
        degenerate,
        info_loss_proxy: info_loss_proxy(mi.nats)?,
        svd_rank: rank,
        svd_retention: retention,
        noise_model_mi,
    })
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Runs `batch` through `model` in eval mode and measures every spatial
/// reduction block of `spec`, the network `model` was built from.
pub fn layer_info_report<T: Element>(
    spec: &NetSpec,
    model: &mut Model<T>,
    batch: &Tensor<T>,
    sample_dims: usize,
    seed: u64,
) -> Result<InfoReport> {
    let audit = audit_reduction(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = model.forward(batch, Mode::Eval, &mut rng)?;
    let source = |name: &str| -> Result<Source> {
        model
            .block_outputs()
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| *s)
            .ok_or_else(|| Error::Build(format!("model has no block '{name}'")))
    };
    let output = |s: Source| match s {
        Source::Input => trace.input(),
        Source::Node(i) => trace.node_output(i),
    };

    let mut blocks = Vec::new();
    for (k, name) in audit.reductions.iter().enumerate() {
        let i = spec
            .index_of(name)
            .ok_or_else(|| Error::Build(format!("spec has no block '{name}'")))?;
        let pre = match spec.preds(i)[0] {
            Pred::Input => trace.input(),
            Pred::Block(j) => output(source(&spec.blocks[j].name)?),
        };
        let post = output(source(name)?);
        let kind = match spec.blocks[i].kind {
            BlockKind::MaxPool => "max_pool",
            _ => "conv",
        };
        let kernel_var = model.nodes().iter().find_map(|node| match &node.layer {
            Layer::Conv { kernel, .. } if node.block == *name => {
                let w: Vec<f64> = kernel.data().iter().map(|v| v.as_f64()).collect();
                Some(population_variance(&w))
            }
            _ => None,
        });
        blocks.push(activation_info(
            name,
            kind,
            pre,
            post,
            sample_dims,
            seed.wrapping_add(k as u64),
            kernel_var,
        )?);
    }
    Ok(InfoReport {
        batch: batch.shape()[0],
        sample_dims,
        seed,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::netspec::{build_model, builtin_design, BuildOptions};

    #[test]
    fn identity_is_fully_correlated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::<f64>::randn(&[40, 4, 4, 2], 1.0, &mut rng).unwrap();
        let info = activation_info("id", "identity", &x, &x, 8, 1, None).unwrap();
        assert!(info.fully_correlated);
        assert_eq!(info.info_loss_proxy, 0.0);
        assert!(info.noise_model_mi.is_none());
    }

    #[test]
    fn independent_activations_carry_little_information() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::<f64>::randn(&[2000, 8], 1.0, &mut rng).unwrap();
        let y = Tensor::<f64>::randn(&[2000, 8], 1.0, &mut rng).unwrap();
        let info = activation_info("b", "conv", &x, &y, 4, 1, Some(0.5)).unwrap();
        assert!(!info.fully_correlated);
        assert!(info.mi_nats < 0.02, "{}", info.mi_nats);
        assert!(info.noise_model_mi.unwrap() > 0.0);
    }

    #[test]
    fn batch_must_exceed_sample_dims() {
        let x = Tensor::<f64>::ones(&[5, 3]).unwrap();
        assert!(activation_info("b", "conv", &x, &x, 4, 0, None).is_err());
    }

    #[test]
    fn random_design1_report() {
        let spec = builtin_design("design1").unwrap().scaled(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut model = build_model::<f32, _>(&spec, &mut rng, BuildOptions::default()).unwrap();
        let batch = Tensor::<f32>::randn(&[64, 28, 28, 3], 1.0, &mut rng).unwrap();
        let report = layer_info_report(&spec, &mut model, &batch, 16, 5).unwrap();
        assert_eq!(report.blocks.len(), 3);
        for b in &report.blocks {
            assert!((0.0..=1.0).contains(&b.svd_retention), "{b:?}");
            assert_eq!(b.kind, "max_pool");
            assert!(b.noise_model_mi.is_none());
        }
        assert!(report.to_table().contains("block4"));
    }
}
