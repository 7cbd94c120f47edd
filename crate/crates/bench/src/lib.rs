//! Seeded inputs shared by the benchmarks.

use featspace::data::derived_rng;
use featspace::infoloss::DMatrix;
use featspace::tensor::Tensor;

/// Standard-normal tensor drawn from `seed`.
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f32> {
    Tensor::randn(shape, 1.0, &mut derived_rng(seed, 0)).expect("extents are positive")
}

/// `A·Aᵀ / n` for a standard-normal `n × (n + 2)` matrix `A`.
pub fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
    let a = Tensor::<f64>::randn(&[n, n + 2], 1.0, &mut derived_rng(seed, 0)).expect("n >= 1");
    let a = DMatrix::from_row_slice(n, n + 2, a.data());
    &a * a.transpose() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_seeded() {
        assert_eq!(random_tensor(&[2, 3], 1), random_tensor(&[2, 3], 1));
        let m = random_psd(4, 2);
        assert_eq!(m, m.transpose());
        assert!(m.symmetric_eigenvalues().iter().all(|&v| v > 0.0));
    }
}
