//! CIFAR-10 ingestion, preprocessing and mini-batch sampling.

mod augment;
mod cifar;
mod sampler;
mod synthetic;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use augment::{
    augment_with, bilinear_resize, hsv_to_rgb, preprocess_eval, preprocess_eval_sized,
    preprocess_train, rgb_to_hsv, standardize, AugmentConfig, AugmentDraw, CROP, STD_FLOOR,
};
pub use cifar::{
    encode_cifar, load_cifar_batch, load_cifar_dir, parse_cifar, write_cifar_batch, LabeledImage,
    CHANNELS, CLASSES, IMAGE_SIDE, RECORD_BYTES, RECORD_PIXELS, TEST_FILE, TRAIN_FILES,
};
pub use sampler::{make_sampler, Balancing, Sampler};
pub use synthetic::synthetic_images;

/// Environment variable naming the directory with the CIFAR-10 binaries.
pub const DATASET_ENV: &str = "CIFAR10_DIR";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream number `counter` of the master `seed`. Streams do
/// not depend on the order in which they are requested.
pub fn derived_rng(seed: u64, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(seed) ^ counter))
}
