use super::{Element, LayerGrad, Mode, Tensor};
use crate::error::{param_err, shape_err, Result};

/// Learned affine parameters and running statistics of one batch-norm
/// layer. Statistics are per channel (the trailing axis).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T: Element = f32> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

impl<T: Element> BatchNormState<T> {
    /// gamma = 1, beta = 0, running mean 0 / variance 1.
    pub fn new(channels: usize) -> Result<Self> {
        Self::with_params(channels, 1e-5, 0.1)
    }

    pub fn with_params(channels: usize, epsilon: f64, momentum: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(param_err!("batch-norm epsilon must be > 0"));
        }
        if !(momentum > 0.0 && momentum < 1.0) {
            return Err(param_err!("batch-norm momentum must lie in (0, 1)"));
        }
        Ok(Self {
            gamma: Tensor::ones(&[channels])?,
            beta: Tensor::zeros(&[channels])?,
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            epsilon,
            momentum,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// What the backward pass needs from a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T: Element = f32> {
    pub x_hat: Tensor<T>,
    pub inv_std: Vec<f64>,
    pub mode: Mode,
}

/// Batch normalization over every axis but the last.
///
/// Train mode normalizes with the biased batch variance and folds the batch
/// statistics into the running estimates (unbiased variance). Eval mode uses
/// the running estimates only.
pub fn batchnorm_forward<T: Element>(
    input: &Tensor<T>,
    state: &mut BatchNormState<T>,
    mode: Mode,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let c = *input.shape().last().unwrap_or(&0);
    if c != state.channels() {
        return Err(shape_err!(
            "batch norm has {} channels, input has {c}",
            state.channels()
        ));
    }
    let batch = input.shape()[0];
    let count = input.len() / c;
    let x = input.data();

    let (mean, var) = match mode {
        Mode::Train => {
            if batch < 2 {
                return Err(param_err!("batch norm in train mode needs batch size >= 2"));
            }
            let mut mean = vec![0.0; c];
            for (i, v) in x.iter().enumerate() {
                mean[i % c] += v.as_f64();
            }
            mean.iter_mut().for_each(|m| *m /= count as f64);
            let mut var = vec![0.0; c];
            for (i, v) in x.iter().enumerate() {
                var[i % c] += (v.as_f64() - mean[i % c]).powi(2);
            }
            var.iter_mut().for_each(|s| *s /= count as f64);
            let unbias = count as f64 / (count as f64 - 1.0).max(1.0);
            for ch in 0..c {
                state.running_mean[ch] =
                    (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * mean[ch];
                state.running_var[ch] = (1.0 - state.momentum) * state.running_var[ch]
                    + state.momentum * var[ch] * unbias;
            }
            (mean, var)
        }
        Mode::Eval => (state.running_mean.clone(), state.running_var.clone()),
    };

    let inv_std: Vec<f64> = var
        .iter()
        .map(|v| 1.0 / (v.max(0.0) + state.epsilon).sqrt())
        .collect();
    let gamma = state.gamma.data();
    let beta = state.beta.data();
    let mut x_hat = Vec::with_capacity(x.len());
    let mut out = Vec::with_capacity(x.len());
    for (i, v) in x.iter().enumerate() {
        let ch = i % c;
        let xh = (v.as_f64() - mean[ch]) * inv_std[ch];
        x_hat.push(T::from_f64(xh));
        out.push(T::from_f64(gamma[ch].as_f64() * xh + beta[ch].as_f64()));
    }
    Ok((
        Tensor::from_vec(input.shape(), out)?,
        BatchNormCache {
            x_hat: Tensor::from_vec(input.shape(), x_hat)?,
            inv_std,
            mode,
        },
    ))
}

/// Gradients with respect to the input, gamma and beta (in that order in
/// `d_params`).
pub fn batchnorm_backward<T: Element>(
    cache: &BatchNormCache<T>,
    state: &BatchNormState<T>,
    d_output: &Tensor<T>,
) -> Result<LayerGrad<T>> {
    d_output.expect_shape(cache.x_hat.shape())?;
    let c = state.channels();
    let count = d_output.len() / c;
    let dy = d_output.data();
    let xh = cache.x_hat.data();

    let mut d_gamma = vec![0.0; c];
    let mut d_beta = vec![0.0; c];
    for (i, (g, h)) in dy.iter().zip(xh).enumerate() {
        d_beta[i % c] += g.as_f64();
        d_gamma[i % c] += g.as_f64() * h.as_f64();
    }

    let gamma = state.gamma.data();
    let d_input: Vec<T> = match cache.mode {
        Mode::Train => {
            let m = count as f64;
            dy.iter()
                .zip(xh)
                .enumerate()
                .map(|(i, (g, h))| {
                    let ch = i % c;
                    let scale = gamma[ch].as_f64() * cache.inv_std[ch] / m;
                    T::from_f64(
                        scale * (m * g.as_f64() - d_beta[ch] - h.as_f64() * d_gamma[ch]),
                    )
                })
                .collect()
        }
        Mode::Eval => dy
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let ch = i % c;
                T::from_f64(g.as_f64() * gamma[ch].as_f64() * cache.inv_std[ch])
            })
            .collect(),
    };

    Ok(LayerGrad {
        d_input: Tensor::from_vec(d_output.shape(), d_input)?,
        d_params: vec![
            Tensor::from_vec(&[c], d_gamma.into_iter().map(T::from_f64).collect())?,
            Tensor::from_vec(&[c], d_beta.into_iter().map(T::from_f64).collect())?,
        ],
    })
}
