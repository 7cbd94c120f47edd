use super::{Element, Tensor};
use crate::error::{param_err, shape_err, Result};

/// Mean softmax cross-entropy over a batch of logits.
///
/// `logits` is `batch × classes` (any trailing singleton spatial axes are
/// accepted, e.g. `batch × 1 × 1 × classes`). Returns the loss and its
/// gradient `(softmax − onehot) / batch` shaped like `logits`.
pub fn softmax_cross_entropy<T: Element>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(f64, Tensor<T>)> {
    let batch = logits.shape()[0];
    let classes = *logits.shape().last().unwrap_or(&0);
    if batch * classes != logits.len() {
        return Err(shape_err!(
            "logits must be batch x classes, got {:?}",
            logits.shape()
        ));
    }
    if labels.len() != batch {
        return Err(shape_err!(
            "{} labels for a batch of {batch}",
            labels.len()
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(param_err!("label {bad} out of range for {classes} classes"));
    }

    let x = logits.data();
    let mut grad = Vec::with_capacity(x.len());
    let mut total = 0.0;
    for (row, &label) in x.chunks(classes).zip(labels) {
        let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        total += z.ln() + max - row[label].as_f64();
        for (j, e) in exps.iter().enumerate() {
            let p = e / z;
            let target = if j == label { 1.0 } else { 0.0 };
            grad.push(T::from_f64((p - target) / batch as f64));
        }
    }
    Ok((total / batch as f64, Tensor::from_vec(logits.shape(), grad)?))
}

/// Row-wise softmax probabilities, `batch × classes`.
pub fn softmax<T: Element>(logits: &Tensor<T>) -> Vec<Vec<f64>> {
    let classes = *logits.shape().last().unwrap_or(&1);
    logits
        .data()
        .chunks(classes)
        .map(|row| {
            let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / z).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn uniform_logits() {
        let x = Tensor::<f64>::zeros(&[3, 10]).unwrap();
        let (loss, _) = softmax_cross_entropy(&x, &[0, 4, 9]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        assert!((loss - 2.302585).abs() < 1e-6);
    }

    #[test]
    fn confident_correct_logit() {
        let mut v = vec![0.0; 10];
        v[3] = 1e3;
        let x = Tensor::<f64>::from_vec(&[1, 10], v).unwrap();
        let (loss, g) = softmax_cross_entropy(&x, &[3]).unwrap();
        assert!(loss < 1e-12);
        assert!(g.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::<f64>::randn(&[4, 10], 5.0, &mut rng).unwrap();
        for row in softmax(&x) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_labels() {
        let x = Tensor::<f64>::zeros(&[2, 10]).unwrap();
        assert!(softmax_cross_entropy(&x, &[0, 10]).is_err());
        assert!(softmax_cross_entropy(&x, &[0]).is_err());
    }
}
