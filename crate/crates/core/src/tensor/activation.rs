use rand::Rng;

use super::{Element, Mode, Tensor};
use crate::error::{param_err, Result};

pub fn relu<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward<T: Element>(input: &Tensor<T>, d_output: &Tensor<T>) -> Result<Tensor<T>> {
    input.zip_with(d_output, |x, g| if x > T::zero() { g } else { T::zero() })
}

/// Per-element multipliers applied by a dropout pass: `0` for dropped
/// elements and `1 / (1 - rate)` for survivors.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T: Element = f32> {
    pub scale: Tensor<T>,
}

/// Inverted dropout. Eval mode (or `rate == 0`) is the identity.
pub fn dropout<T: Element, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    rng: &mut R,
    mode: Mode,
) -> Result<(Tensor<T>, DropoutMask<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(param_err!("dropout rate must lie in [0, 1), got {rate}"));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((
            input.clone(),
            DropoutMask {
                scale: input.map(|_| T::one()),
            },
        ));
    }
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let mut scale = input.zeros_like();
    for s in scale.data_mut() {
        *s = if rng.random::<f64>() < rate {
            T::zero()
        } else {
            keep
        };
    }
    let out = input.zip_with(&scale, |x, s| x * s)?;
    Ok((out, DropoutMask { scale }))
}

pub fn dropout_backward<T: Element>(mask: &DropoutMask<T>, d_output: &Tensor<T>) -> Result<Tensor<T>> {
    d_output.zip_with(&mask.scale, |g, s| g * s)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn relu_values() {
        let x = Tensor::<f64>::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&x, &Tensor::ones(&[3]).unwrap()).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::<f64>::randn(&[100], 1.0, &mut rng).unwrap();
        let (y, _) = dropout(&x, 0.0, &mut rng, Mode::Train).unwrap();
        assert_eq!(y, x);
        let (y, _) = dropout(&x, 0.9, &mut rng, Mode::Eval).unwrap();
        assert_eq!(y, x);
        assert!(dropout(&x, 1.0, &mut rng, Mode::Train).is_err());
        assert!(dropout(&x, -0.1, &mut rng, Mode::Train).is_err());
    }

    #[test]
    fn dropout_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = Tensor::<f64>::ones(&[100_000]).unwrap();
        let (y, mask) = dropout(&x, 0.5, &mut rng, Mode::Train).unwrap();
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        assert!((zeros - 0.5).abs() < 0.01, "zero fraction {zeros}");
        let mean = y.sum() / 1e5;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        let g = dropout_backward(&mask, &x).unwrap();
        assert_eq!(g, y);
    }
}
