use super::{Element, Tensor};
use crate::error::{param_err, shape_err, Result};

/// Max-pool window used by every built-in design.
pub const POOL_WINDOW: usize = 2;
/// Max-pool stride used by every built-in design.
pub const POOL_STRIDE: usize = 2;

/// Flat input offsets of the maxima selected by [`maxpool2d`].
#[derive(Debug, Clone, PartialEq)]
pub struct PoolIndices {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// Max pooling with floor semantics (trailing rows/columns that do not fill
/// a window are dropped). Ties resolve to the first position in row-major
/// scan order.
pub fn maxpool2d<T: Element>(
    input: &Tensor<T>,
    window: usize,
    stride: usize,
) -> Result<(Tensor<T>, PoolIndices)> {
    if window == 0 || stride == 0 {
        return Err(param_err!("pool window and stride must be >= 1"));
    }
    let (n, h, w, c) = input.dims4()?;
    if h < window || w < window {
        return Err(shape_err!(
            "pool window {window} larger than spatial extent {h}x{w}"
        ));
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let x = input.data();
    let mut out = Vec::with_capacity(n * oh * ow * c);
    let mut argmax = Vec::with_capacity(n * oh * ow * c);
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best_idx = ((b * h + oy * stride) * w + ox * stride) * c + ch;
                    let mut best = x[best_idx];
                    for dy in 0..window {
                        for dx in 0..window {
                            let idx = ((b * h + oy * stride + dy) * w + ox * stride + dx) * c + ch;
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(&[n, oh, ow, c], out)?,
        PoolIndices {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

/// Routes each output gradient to the input position that won the max.
pub fn maxpool2d_backward<T: Element>(
    indices: &PoolIndices,
    d_output: &Tensor<T>,
) -> Result<Tensor<T>> {
    if d_output.len() != indices.argmax.len() {
        return Err(shape_err!(
            "pool gradient has {} values, expected {}",
            d_output.len(),
            indices.argmax.len()
        ));
    }
    let mut d_input = Tensor::zeros(&indices.input_shape)?;
    let d = d_input.data_mut();
    for (&idx, &g) in indices.argmax.iter().zip(d_output.data()) {
        d[idx] = d[idx] + g;
    }
    Ok(d_input)
}

/// Spatial mean per channel: `n × h × w × c` to `n × 1 × 1 × c`.
pub fn global_avg_pool<T: Element>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, h, w, c) = input.dims4()?;
    let area = h * w;
    let x = input.data();
    let mut out = vec![T::zero(); n * c];
    for b in 0..n {
        for ch in 0..c {
            let mut acc = 0.0;
            for p in 0..area {
                acc += x[(b * area + p) * c + ch].as_f64();
            }
            out[b * c + ch] = T::from_f64(acc / area as f64);
        }
    }
    Tensor::from_vec(&[n, 1, 1, c], out)
}

pub fn global_avg_pool_backward<T: Element>(
    input_shape: &[usize],
    d_output: &Tensor<T>,
) -> Result<Tensor<T>> {
    let [n, h, w, c] = *input_shape else {
        return Err(shape_err!("expected a rank-4 input shape, got {input_shape:?}"));
    };
    d_output.expect_shape(&[n, 1, 1, c])?;
    let area = h * w;
    let scale = T::from_f64(1.0 / area as f64);
    let g = d_output.data();
    let mut d = vec![T::zero(); n * area * c];
    for b in 0..n {
        for p in 0..area {
            for ch in 0..c {
                d[(b * area + p) * c + ch] = g[b * c + ch] * scale;
            }
        }
    }
    Tensor::from_vec(input_shape, d)
}
