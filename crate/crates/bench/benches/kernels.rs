use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use featspace::data::{derived_rng, preprocess_train, synthetic_images, AugmentConfig};
use featspace::netspec::{build_model, builtin_design, BuildOptions};
use featspace::tensor::{conv2d_backward, conv2d_forward, maxpool2d, Mode, Padding, Tensor};
use featspace_bench::random_tensor;

fn conv(c: &mut Criterion) {
    let x = random_tensor(&[16, 28, 28, 16], 1);
    let k = random_tensor(&[3, 3, 16, 32], 2);
    let y = conv2d_forward(&x, &k, 1, Padding::Same).unwrap();
    let d = random_tensor(y.shape(), 3);
    c.bench_function("conv3x3 16x28x28x16->32 forward", |b| {
        b.iter(|| conv2d_forward(black_box(&x), black_box(&k), 1, Padding::Same).unwrap())
    });
    c.bench_function("conv3x3 16x28x28x16->32 backward", |b| {
        b.iter(|| conv2d_backward(black_box(&x), black_box(&k), 1, Padding::Same, black_box(&d)).unwrap())
    });
    c.bench_function("conv3x3 stride 2 forward", |b| {
        b.iter(|| conv2d_forward(black_box(&x), black_box(&k), 2, Padding::Same).unwrap())
    });
    c.bench_function("maxpool 16x28x28x16", |b| b.iter(|| maxpool2d(black_box(&x), 2, 2).unwrap()));
}

fn model(c: &mut Criterion) {
    let spec = builtin_design("design1_conv").unwrap().scaled(8).unwrap();
    let mut model = build_model::<f32, _>(&spec, &mut derived_rng(1, 0), BuildOptions::default()).unwrap();
    let x = random_tensor(&[32, 28, 28, 3], 4);
    let mut rng = derived_rng(2, 0);
    c.bench_function("design1_conv/8 train forward batch 32", |b| {
        b.iter(|| model.forward(black_box(&x), Mode::Train, &mut rng).unwrap())
    });
}

fn augmentation(c: &mut Criterion) {
    let images = synthetic_images(32, 1);
    let cfg = AugmentConfig::default();
    let mut rng = derived_rng(3, 0);
    c.bench_function("augment 32 images", |b| {
        b.iter(|| {
            let v: Vec<Tensor<f32>> = images.iter().map(|i| preprocess_train(i, &cfg, &mut rng).unwrap()).collect();
            v
        })
    });
}

criterion_group!(benches, conv, model, augmentation);
criterion_main!(benches);
