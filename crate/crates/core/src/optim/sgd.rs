use crate::error::{shape_err, Result};
use crate::tensor::{Element, Tensor};

/// Plain SGD: `w ← w − lr·g` for each parameter/gradient pair.
pub fn sgd_step<T: Element>(params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(shape_err!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        ));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(shape_err!(
                "parameter shape {:?} does not match gradient shape {:?}",
                p.shape(),
                g.shape()
            ));
        }
    }
    let step = T::from_f64(-lr);
    for (p, g) in params.iter_mut().zip(grads) {
        p.axpy(step, g)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: f64) -> Tensor<f64> {
        Tensor::from_vec(&[1], vec![v]).unwrap()
    }

    #[test]
    fn examples() {
        let mut w = t(1.0);
        sgd_step(&mut [&mut w], &[t(2.0)], 0.0).unwrap();
        assert_eq!(w.data(), &[1.0]);
        sgd_step(&mut [&mut w], &[t(2.0)], 0.1).unwrap();
        assert!((w.data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bowl_contracts() {
        let mut w = t(3.0);
        let mut prev = 3.0f64;
        for _ in 0..20 {
            let g = t(2.0 * w.data()[0]);
            sgd_step(&mut [&mut w], &[g], 0.4).unwrap();
            assert!(w.data()[0].abs() < prev.abs());
            prev = w.data()[0];
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut w = t(1.0);
        let g = Tensor::<f64>::zeros(&[2]).unwrap();
        assert!(sgd_step(&mut [&mut w], &[g], 0.1).is_err());
        assert!(sgd_step(&mut [&mut w], &[], 0.1).is_err());
    }
}
