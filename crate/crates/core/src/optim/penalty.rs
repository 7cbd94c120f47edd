use crate::error::Result;
use crate::tensor::{Element, Tensor};

/// `data_loss + l1·Σ|w| + l2·Σw²` over every tensor in `params`.
pub fn regularized_loss<T: Element>(data_loss: f64, params: &[&Tensor<T>], l1: f64, l2: f64) -> f64 {
    let mut loss = data_loss;
    for p in params {
        if l1 != 0.0 {
            loss += l1 * p.data().iter().map(|v| v.as_f64().abs()).sum::<f64>();
        }
        if l2 != 0.0 {
            loss += l2 * p.sum_sq();
        }
    }
    loss
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient of the penalty terms: `l1·sign(w) + 2·l2·w`, `sign(0) = 0`.
pub fn penalty_grad<T: Element>(w: &Tensor<T>, l1: f64, l2: f64) -> Tensor<T> {
    w.map(|v| {
        let x = v.as_f64();
        T::from_f64(l1 * sign(x) + 2.0 * l2 * x)
    })
}

/// Adds the penalty gradient of `w` into `grad`.
pub fn add_penalty_grad<T: Element>(grad: &mut Tensor<T>, w: &Tensor<T>, l1: f64, l2: f64) -> Result<()> {
    if l1 == 0.0 && l2 == 0.0 {
        return Ok(());
    }
    grad.axpy(T::one(), &penalty_grad(w, l1, l2))
}
