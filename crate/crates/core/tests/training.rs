use featspace::analyzer::count_params;
use featspace::data::{synthetic_images, AugmentConfig, LabeledImage};
use featspace::netspec::{build_model, builtin_design, parse_spec, BuildOptions};
use featspace::optim::{train, DecayPolicy, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn model_parameters_match_static_count() {
    for name in ["design1", "design1_conv", "design2", "design3", "design4"] {
        let spec = builtin_design(name).unwrap().scaled(8).unwrap();
        let model = build_model::<f32, _>(&spec, &mut ChaCha8Rng::seed_from_u64(0), BuildOptions::default()).unwrap();
        assert_eq!(model.param_count(), count_params(&spec).unwrap().total, "{name}");
    }
}

/// Two well-separated synthetic classes, relabelled 0/1.
fn two_class(n: usize) -> Vec<LabeledImage> {
    synthetic_images(5 * n, 17)
        .into_iter()
        .filter(|img| img.label == 0 || img.label == 2)
        .take(n)
        .map(|img| LabeledImage::new(img.pixels, img.label / 2).unwrap())
        .collect()
}

#[test]
fn separable_two_class_subset_is_learned() {
    let data = two_class(200);
    assert_eq!(data.len(), 200);
    let spec = parse_spec("c1: conv3x3, 8\np1: max_pool\nc2: conv3x3, 8\np2: max_pool\nout: 1 x conv1x1, 1, 2").unwrap();
    let mut model = build_model(&spec, &mut ChaCha8Rng::seed_from_u64(5), BuildOptions::default()).unwrap();
    let cfg = TrainConfig {
        batch_size: 20,
        epochs: 30,
        seed: 5,
        policy: DecayPolicy::poly(0.05, 1.0, 0),
        augment: AugmentConfig::crop_only(),
        ..TrainConfig::default()
    };
    let log = train(&mut model, &data, &[], &cfg).unwrap();
    let last = log.epochs.last().unwrap();
    assert!(last.train_acc > 0.95, "{log:?}");
}
