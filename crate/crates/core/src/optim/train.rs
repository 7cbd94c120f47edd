use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{add_penalty_grad, regularized_loss, sgd_step, DecayPolicy};
use crate::data::{
    derived_rng, make_sampler, preprocess_eval, preprocess_train, AugmentConfig, Balancing,
    LabeledImage,
};
use crate::error::{param_err, Error, Result};
use crate::netspec::{BuildOptions, Model, ParamKind};
use crate::tensor::{softmax_cross_entropy, Mode, Tensor};

/// Stream offsets separating the independent random streams of a run.
const AUGMENT_STREAM: u64 = 0xA0_6E_17;
const DROPOUT_STREAM: u64 = 0xD2_0F_07;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub policy: DecayPolicy,
    /// Coefficient of `Σ|w|` over conv kernels.
    pub l1: f64,
    /// Coefficient of `Σw²` over conv kernels.
    pub l2: f64,
    pub dropout: bool,
    pub batch_norm: bool,
    pub balancing: Balancing,
    pub augment: AugmentConfig,
    /// Batch size used for test-set evaluation.
    pub eval_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 20,
            seed: 1,
            policy: DecayPolicy::poly(0.05, 1.0, 0),
            l1: 0.0,
            l2: 0.0,
            dropout: true,
            batch_norm: true,
            balancing: Balancing::None,
            augment: AugmentConfig::default(),
            eval_batch: 250,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(param_err!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if self.eval_batch == 0 {
            return Err(param_err!("eval_batch must be >= 1"));
        }
        if !(self.l1 >= 0.0 && self.l2 >= 0.0) {
            return Err(param_err!(
                "penalty coefficients must be >= 0, got l1={} l2={}",
                self.l1,
                self.l2
            ));
        }
        self.augment.validate()
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            batch_norm: self.batch_norm,
            dropout: self.dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean data loss (penalties excluded) over the epoch's batches.
    pub train_loss: f64,
    pub train_acc: f64,
    /// Empty when there is no test set.
    pub test_acc: Option<f64>,
    /// Rate at the first iteration of the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub epochs: Vec<EpochMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub epochs: usize,
    pub iterations: u64,
    pub final_train_loss: Option<f64>,
    pub final_train_acc: Option<f64>,
    pub final_test_acc: Option<f64>,
    pub best_test_acc: Option<f64>,
}

impl MetricsLog {
    pub fn final_test_acc(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.test_acc)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.epochs {
            w.serialize(e)?;
        }
        if self.epochs.is_empty() {
            w.write_record(["epoch", "train_loss", "train_acc", "test_acc", "lr"])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let epochs = r.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(Self { epochs })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn summary(&self, iterations: u64) -> RunSummary {
        let last = self.epochs.last();
        RunSummary {
            epochs: self.epochs.len(),
            iterations,
            final_train_loss: last.map(|e| e.train_loss),
            final_train_acc: last.map(|e| e.train_acc),
            final_test_acc: self.final_test_acc(),
            best_test_acc: self
                .epochs
                .iter()
                .filter_map(|e| e.test_acc)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))),
        }
    }
}

fn argmax(row: &[f32]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f32::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

fn correct(logits: &Tensor<f32>, labels: &[usize]) -> usize {
    let classes = logits.len() / labels.len();
    logits
        .data()
        .chunks(classes)
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count()
}

/// Eval-mode accuracy on centrally cropped images. `None` for an empty set.
pub fn evaluate(model: &mut Model<f32>, images: &[LabeledImage], batch: usize) -> Result<Option<f64>> {
    if images.is_empty() {
        return Ok(None);
    }
    let mut hits = 0;
    for chunk in images.chunks(batch.max(1)) {
        let x = Tensor::stack(&chunk.iter().map(preprocess_eval).collect::<Vec<_>>())?;
        let labels: Vec<usize> = chunk.iter().map(|i| i.label as usize).collect();
        hits += correct(&model.predict(&x)?, &labels);
    }
    Ok(Some(hits as f64 / images.len() as f64))
}

/// Total iterations a run of `config` over `n_train` images performs.
pub fn total_iterations(config: &TrainConfig, n_train: usize) -> u64 {
    (config.epochs * n_train.div_ceil(config.batch_size.max(1))) as u64
}

/// Mini-batch SGD with augmentation, penalties on conv kernels and the
/// configured learning-rate policy. Test accuracy is measured after every
/// epoch. Every random choice derives from `config.seed`.
pub fn train(
    model: &mut Model<f32>,
    train_set: &[LabeledImage],
    test_set: &[LabeledImage],
    config: &TrainConfig,
) -> Result<MetricsLog> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut log = MetricsLog::default();
    if config.epochs == 0 {
        return Ok(log);
    }
    let labels: Vec<usize> = train_set.iter().map(|i| i.label as usize).collect();
    let sampler = make_sampler(&labels, config.balancing, config.batch_size, config.seed)?;
    let total = (config.epochs * sampler.batches_per_epoch()) as u64;
    let policy = config.policy.resolve(total);
    policy.validate()?;
    let kernel_mask: Vec<bool> = model
        .params()
        .iter()
        .map(|(k, _)| *k == ParamKind::Kernel)
        .collect();
    let mut dropout_rng = derived_rng(config.seed ^ DROPOUT_STREAM, 0);
    let mut iter: u64 = 0;

    for epoch in 0..config.epochs {
        let epoch_lr = policy.lr_at(iter);
        let (mut loss_sum, mut batches, mut hits, mut seen) = (0.0, 0usize, 0usize, 0usize);
        for batch in sampler.epoch(epoch as u64) {
            let it = iter;
            iter += 1;
            // Batch norm needs two samples.
            if batch.len() < 2 {
                continue;
            }
            let images = batch
                .iter()
                .enumerate()
                .map(|(k, &i)| {
                    let mut rng = derived_rng(
                        config.seed ^ AUGMENT_STREAM,
                        it * config.batch_size as u64 + k as u64,
                    );
                    preprocess_train(&train_set[i], &config.augment, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let x = Tensor::stack(&images)?;
            let ys: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();

            let trace = model.forward(&x, Mode::Train, &mut dropout_rng)?;
            let (data_loss, d_logits) = softmax_cross_entropy(trace.logits(), &ys)?;
            hits += correct(trace.logits(), &ys);
            seen += ys.len();
            let (mut grads, _) = model.backward(&trace, &d_logits)?;

            let params = model.params();
            let kernels: Vec<&Tensor<f32>> = params
                .iter()
                .zip(&kernel_mask)
                .filter(|(_, &k)| k)
                .map(|((_, t), _)| *t)
                .collect();
            let loss = regularized_loss(data_loss, &kernels, config.l1, config.l2);
            for ((g, (_, w)), &k) in grads.iter_mut().zip(&params).zip(&kernel_mask) {
                if k {
                    add_penalty_grad(g, w, config.l1, config.l2)?;
                }
            }
            let grad_norm = grads.iter().map(Tensor::sum_sq).sum::<f64>().sqrt();
            let lr = policy.lr_at(it);
            if !loss.is_finite() || !grad_norm.is_finite() {
                return Err(Error::Diverged {
                    iteration: it as usize,
                    loss,
                    lr,
                    grad_norm,
                });
            }
            let mut params_mut: Vec<&mut Tensor<f32>> =
                model.params_mut().into_iter().map(|(_, t)| t).collect();
            sgd_step(&mut params_mut, &grads, lr)?;
            loss_sum += data_loss;
            batches += 1;
        }
        let test_acc = evaluate(model, test_set, config.eval_batch)?;
        let m = EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / batches.max(1) as f64,
            train_acc: hits as f64 / seen.max(1) as f64,
            test_acc,
            lr: epoch_lr,
        };
        log::info!(
            "{}: epoch {} loss {:.4} train_acc {:.4} test_acc {} lr {:.5}",
            model.name,
            m.epoch,
            m.train_loss,
            m.train_acc,
            m.test_acc.map_or_else(|| "-".into(), |a| format!("{a:.4}")),
            m.lr
        );
        log.epochs.push(m);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::synthetic_images;
    use crate::netspec::{build_model, parse_spec};

    fn tiny_model(seed: u64) -> Model<f32> {
        let spec = parse_spec(
            "c1: conv3x3, 4\np1: max_pool\nc2: conv3x3, 8\np2: max_pool\nout: 1 x conv1x1, 1, 10",
        )
        .unwrap();
        build_model(&spec, &mut ChaCha8Rng::seed_from_u64(seed), BuildOptions::default()).unwrap()
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            batch_size: 16,
            epochs: 2,
            eval_batch: 32,
            policy: DecayPolicy::poly(0.05, 1.0, 0),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_leave_model_untouched() {
        let mut model = tiny_model(1);
        let before: Vec<Tensor<f32>> = model.params().into_iter().map(|(_, t)| t.clone()).collect();
        let cfg = TrainConfig {
            epochs: 0,
            ..quick_config()
        };
        let log = train(&mut model, &synthetic_images(20, 0), &[], &cfg).unwrap();
        assert!(log.epochs.is_empty());
        let after: Vec<Tensor<f32>> = model.params().into_iter().map(|(_, t)| t.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn logs_policy_rate_per_epoch() {
        let mut model = tiny_model(2);
        let data = synthetic_images(48, 1);
        let cfg = quick_config();
        let log = train(&mut model, &data, &data[..20], &cfg).unwrap();
        assert_eq!(log.epochs.len(), 2);
        let policy = cfg.policy.resolve(total_iterations(&cfg, data.len()));
        assert_eq!(log.epochs[0].lr, policy.lr_at(0));
        assert_eq!(log.epochs[1].lr, policy.lr_at(3));
        for e in &log.epochs {
            assert!((0.0..=1.0).contains(&e.train_acc));
            assert!((0.0..=1.0).contains(&e.test_acc.unwrap()));
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let data = synthetic_images(40, 2);
        let run = || {
            let mut model = tiny_model(3);
            train(&mut model, &data, &data[..10], &quick_config()).unwrap().to_csv().unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn divergence_is_reported() {
        let mut model = tiny_model(4);
        let cfg = TrainConfig {
            policy: DecayPolicy::fixed(1e30),
            ..quick_config()
        };
        match train(&mut model, &synthetic_images(32, 3), &[], &cfg) {
            Err(Error::Diverged { iteration, lr, .. }) => {
                assert!(iteration <= 4);
                assert_eq!(lr, 1e30);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let log = MetricsLog {
            epochs: vec![
                EpochMetrics {
                    epoch: 1,
                    train_loss: 2.25,
                    train_acc: 0.125,
                    test_acc: Some(0.5),
                    lr: 0.05,
                },
                EpochMetrics {
                    epoch: 2,
                    train_loss: 1.5,
                    train_acc: 0.25,
                    test_acc: None,
                    lr: 0.025,
                },
            ],
        };
        let text = log.to_csv().unwrap();
        assert!(text.starts_with("epoch,train_loss,train_acc,test_acc,lr\n"));
        assert_eq!(MetricsLog::from_csv(&text).unwrap(), log);
        assert_eq!(log.summary(8).best_test_acc, Some(0.5));
        assert!(MetricsLog::default().to_csv().unwrap().starts_with("epoch,"));
    }
}
