use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::cifar::{LabeledImage, CLASSES, IMAGE_SIDE};
use super::derived_rng;

/// Base color of each class.
const PALETTE: [[f64; 3]; CLASSES] = [
    [0.85, 0.20, 0.20],
    [0.20, 0.75, 0.25],
    [0.20, 0.30, 0.85],
    [0.85, 0.80, 0.20],
    [0.75, 0.25, 0.80],
    [0.20, 0.80, 0.80],
    [0.55, 0.55, 0.55],
    [0.95, 0.55, 0.15],
    [0.40, 0.20, 0.10],
    [0.10, 0.10, 0.10],
];

/// Seeded stand-in for CIFAR-10: each class is a tinted image with a
/// class-specific stripe pattern plus Gaussian noise. Labels cycle
/// `0, 1, …, 9` so every prefix is nearly balanced.
pub fn synthetic_images(n: usize, seed: u64) -> Vec<LabeledImage> {
    let noise = Normal::new(0.0, 0.12).expect("valid std");
    (0..n)
        .map(|i| {
            let label = i % CLASSES;
            let mut rng = derived_rng(seed ^ 0x5F4E_5448, i as u64);
            let angle = label as f64 * std::f64::consts::PI / CLASSES as f64;
            let freq = 0.35 + 0.05 * (label % 3) as f64;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let brightness = rng.random_range(0.85..1.15);
            let (sin, cos) = angle.sin_cos();
            let plane = IMAGE_SIDE * IMAGE_SIDE;
            let mut pixels = vec![0u8; 3 * plane];
            for y in 0..IMAGE_SIDE {
                for x in 0..IMAGE_SIDE {
                    let t = (x as f64 * cos + y as f64 * sin) * freq + phase;
                    let stripe = 0.25 * t.sin();
                    for c in 0..3 {
                        let v = PALETTE[label][c] * brightness + stripe + noise.sample(&mut rng);
                        pixels[c * plane + y * IMAGE_SIDE + x] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                    }
                }
            }
            LabeledImage {
                pixels,
                label: label as u8,
            }
        })
        .collect()
}
