use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cifar::{LabeledImage, CHANNELS, IMAGE_SIDE};
use crate::error::{param_err, Result};
use crate::tensor::Tensor;

/// Side of the network input patch.
pub const CROP: usize = 28;
/// Lower bound on the standard deviation used for standardization.
pub const STD_FLOOR: f64 = 1e-6;

/// Training-time augmentation. Jitters are applied hue, then contrast,
/// then saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub crop: usize,
    pub flip_lr: f64,
    pub flip_ud: f64,
    /// Hue shift drawn from `U[-hue_delta, hue_delta]`, as a fraction of
    /// the hue circle.
    pub hue_delta: f64,
    pub contrast_range: (f64, f64),
    pub saturation_range: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            crop: CROP,
            flip_lr: 0.5,
            flip_ud: 0.5,
            hue_delta: 0.08,
            contrast_range: (0.7, 1.3),
            saturation_range: (0.6, 1.4),
        }
    }
}

impl AugmentConfig {
    /// Random crops only.
    pub fn crop_only() -> Self {
        Self {
            flip_lr: 0.0,
            flip_ud: 0.0,
            hue_delta: 0.0,
            contrast_range: (1.0, 1.0),
            saturation_range: (1.0, 1.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.crop == 0 || self.crop > IMAGE_SIDE {
            return Err(param_err!("crop must lie in 1..={IMAGE_SIDE}, got {}", self.crop));
        }
        for (name, p) in [("flip_lr", self.flip_lr), ("flip_ud", self.flip_ud)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(param_err!("{name} must be a probability, got {p}"));
            }
        }
        if !(0.0..=0.5).contains(&self.hue_delta) {
            return Err(param_err!("hue_delta must lie in [0, 0.5], got {}", self.hue_delta));
        }
        for (name, (lo, hi)) in [
            ("contrast_range", self.contrast_range),
            ("saturation_range", self.saturation_range),
        ] {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return Err(param_err!("{name} must satisfy 0 <= lo <= hi, got ({lo}, {hi})"));
            }
        }
        Ok(())
    }

    /// Draws one set of augmentation choices.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> AugmentDraw {
        let max_off = IMAGE_SIDE - self.crop;
        let uniform = |rng: &mut R, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        };
        AugmentDraw {
            offset: (
                rng.random_range(0..=max_off),
                rng.random_range(0..=max_off),
            ),
            flip_lr: rng.random::<f64>() < self.flip_lr,
            flip_ud: rng.random::<f64>() < self.flip_ud,
            hue_shift: uniform(rng, (-self.hue_delta, self.hue_delta)),
            contrast: uniform(rng, self.contrast_range),
            saturation: uniform(rng, self.saturation_range),
        }
    }
}

/// Concrete choices for one augmented image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    /// Crop origin `(row, column)`.
    pub offset: (usize, usize),
    pub flip_lr: bool,
    pub flip_ud: bool,
    pub hue_shift: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl AugmentDraw {
    /// No flips or jitter, crop at `offset`.
    pub fn plain(offset: (usize, usize)) -> Self {
        Self {
            offset,
            flip_lr: false,
            flip_ud: false,
            hue_shift: 0.0,
            contrast: 1.0,
            saturation: 1.0,
        }
    }
}

fn crop(img: &LabeledImage, side: usize, (oy, ox): (usize, usize)) -> Vec<f32> {
    let mut out = Vec::with_capacity(side * side * CHANNELS);
    for y in oy..oy + side {
        for x in ox..ox + side {
            for c in 0..CHANNELS {
                out.push(img.at(y, x, c) as f32 / 255.0);
            }
        }
    }
    out
}

fn flip(px: &mut [f32], side: usize, lr: bool, ud: bool) {
    if !(lr || ud) {
        return;
    }
    let src = px.to_vec();
    for y in 0..side {
        for x in 0..side {
            let sy = if ud { side - 1 - y } else { y };
            let sx = if lr { side - 1 - x } else { x };
            for c in 0..CHANNELS {
                px[(y * side + x) * CHANNELS + c] = src[(sy * side + sx) * CHANNELS + c];
            }
        }
    }
}

/// RGB in `[0,1]` to (hue in `[0,1)`, saturation, value).
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / d).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / d + 2.0) / 6.0
    } else {
        ((r - g) / d + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h, s, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h6 % 2.0 - 1.0).abs());
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (r + m, g + m, b + m)
}

fn map_hsv(px: &mut [f32], f: impl Fn(f64, f64, f64) -> (f64, f64, f64)) {
    for p in px.chunks_exact_mut(CHANNELS) {
        let (h, s, v) = rgb_to_hsv(p[0] as f64, p[1] as f64, p[2] as f64);
        let (h, s, v) = f(h, s, v);
        let (r, g, b) = hsv_to_rgb(h, s, v);
        p[0] = r as f32;
        p[1] = g as f32;
        p[2] = b as f32;
    }
}

/// Scales each channel's deviation from its mean by `factor`, then clamps
/// to `[0, 1]` so the HSV step sees valid colors.
fn adjust_contrast(px: &mut [f32], factor: f64) {
    let n = (px.len() / CHANNELS) as f64;
    let mut mean = [0.0f64; CHANNELS];
    for p in px.chunks_exact(CHANNELS) {
        for c in 0..CHANNELS {
            mean[c] += p[c] as f64;
        }
    }
    for p in px.chunks_exact_mut(CHANNELS) {
        for c in 0..CHANNELS {
            let m = mean[c] / n;
            p[c] = (m + (p[c] as f64 - m) * factor).clamp(0.0, 1.0) as f32;
        }
    }
}

/// `(x − mean) / max(std, 1e-6)` over all values jointly.
pub fn standardize(px: &mut [f32]) {
    let n = px.len() as f64;
    let mean = px.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = px.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(STD_FLOOR);
    for v in px {
        *v = ((*v as f64 - mean) / std) as f32;
    }
}

/// Applies a fixed set of augmentation choices; returns `side×side×3`.
pub fn augment_with(img: &LabeledImage, side: usize, draw: &AugmentDraw) -> Result<Tensor<f32>> {
    if side == 0 || draw.offset.0 + side > IMAGE_SIDE || draw.offset.1 + side > IMAGE_SIDE {
        return Err(param_err!(
            "crop of {side} at {:?} does not fit a {IMAGE_SIDE}x{IMAGE_SIDE} image",
            draw.offset
        ));
    }
    let mut px = crop(img, side, draw.offset);
    flip(&mut px, side, draw.flip_lr, draw.flip_ud);
    if draw.hue_shift != 0.0 {
        map_hsv(&mut px, |h, s, v| (h + draw.hue_shift, s, v));
    }
    if draw.contrast != 1.0 {
        adjust_contrast(&mut px, draw.contrast);
    }
    if draw.saturation != 1.0 {
        map_hsv(&mut px, |h, s, v| (h, (s * draw.saturation).min(1.0), v));
    }
    standardize(&mut px);
    Tensor::from_vec(&[side, side, CHANNELS], px)
}

/// Training pipeline: random crop, flips, color jitter, standardization.
pub fn preprocess_train<R: Rng + ?Sized>(
    img: &LabeledImage,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Tensor<f32>> {
    cfg.validate()?;
    augment_with(img, cfg.crop, &cfg.draw(rng))
}

/// Evaluation pipeline: central `CROP×CROP` patch, standardized.
pub fn preprocess_eval(img: &LabeledImage) -> Tensor<f32> {
    preprocess_eval_sized(img, CROP, CROP, CROP).expect("central crop always fits")
}

/// Central `crop×crop` patch, bilinearly resized to `out_h×out_w` when that
/// differs from the crop, then standardized.
pub fn preprocess_eval_sized(
    img: &LabeledImage,
    crop_side: usize,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor<f32>> {
    if crop_side == 0 || crop_side > IMAGE_SIDE {
        return Err(param_err!("crop must lie in 1..={IMAGE_SIDE}, got {crop_side}"));
    }
    let off = (IMAGE_SIDE - crop_side) / 2;
    let px = crop(img, crop_side, (off, off));
    let t = Tensor::from_vec(&[crop_side, crop_side, CHANNELS], px)?;
    let t = if (out_h, out_w) == (crop_side, crop_side) {
        t
    } else {
        bilinear_resize(&t, out_h, out_w)?
    };
    let shape = t.shape().to_vec();
    let mut px = t.into_data();
    standardize(&mut px);
    Tensor::from_vec(&shape, px)
}

/// Bilinear resize of an `h×w×c` tensor with half-pixel centers
/// (`align_corners = false`); source coordinates are clamped at the edges.
pub fn bilinear_resize(img: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    let [h, w, c] = img.shape() else {
        return Err(param_err!("bilinear_resize expects h x w x c, got {:?}", img.shape()));
    };
    let (h, w, c) = (*h, *w, *c);
    if out_h == 0 || out_w == 0 {
        return Err(param_err!("output extents must be >= 1, got {out_h}x{out_w}"));
    }
    if (out_h, out_w) == (h, w) {
        return Ok(img.clone());
    }
    let src = |o: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        let pos = ((o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, pos - lo as f64)
    };
    let d = img.data();
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for oy in 0..out_h {
        let (y0, y1, fy) = src(oy, h, out_h);
        for ox in 0..out_w {
            let (x0, x1, fx) = src(ox, w, out_w);
            for ch in 0..c {
                let at = |y: usize, x: usize| d[(y * w + x) * c + ch] as f64;
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bot = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out.push((top * (1.0 - fy) + bot * fy) as f32);
            }
        }
    }
    Tensor::from_vec(&[out_h, out_w, c], out)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::cifar::RECORD_PIXELS;

    fn noisy(seed: u64) -> LabeledImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px = (0..RECORD_PIXELS).map(|_| rng.random::<u8>()).collect();
        LabeledImage::new(px, 3).unwrap()
    }

    fn checker() -> LabeledImage {
        let mut px = vec![0u8; RECORD_PIXELS];
        for c in 0..3 {
            for y in 0..32 {
                for x in 0..32 {
                    px[c * 1024 + y * 32 + x] = ((x + 2 * y + 5 * c) % 7 * 30) as u8;
                }
            }
        }
        LabeledImage::new(px, 0).unwrap()
    }

    fn moments(t: &Tensor<f32>) -> (f64, f64) {
        let n = t.len() as f64;
        let mean = t.sum() / n;
        let var = t.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn train_output_is_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in 0..5 {
            let t = preprocess_train(&noisy(s), &AugmentConfig::default(), &mut rng).unwrap();
            assert_eq!(t.shape(), &[28, 28, 3]);
            let (m, sd) = moments(&t);
            assert!(m.abs() < 1e-6, "{m}");
            assert!((sd - 1.0).abs() < 1e-5, "{sd}");
        }
    }

    #[test]
    fn plain_draw_is_top_left_crop() {
        let img = checker();
        let t = augment_with(&img, 28, &AugmentDraw::plain((0, 0))).unwrap();
        let mut want = crop(&img, 28, (0, 0));
        standardize(&mut want);
        assert_eq!(t.data(), &want[..]);
        assert_eq!(crop(&img, 28, (0, 0))[0], img.at(0, 0, 0) as f32 / 255.0);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let img = noisy(9);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            preprocess_train(&img, &AugmentConfig::default(), &mut rng).unwrap()
        };
        assert_eq!(run().data(), run().data());
    }

    #[test]
    fn flips_reverse_axes() {
        let img = checker();
        let base = crop(&img, 28, (2, 2));
        let mut lr = base.clone();
        flip(&mut lr, 28, true, false);
        assert_eq!(&lr[0..3], &base[27 * 3..28 * 3]);
        let mut ud = base.clone();
        flip(&mut ud, 28, false, true);
        assert_eq!(&ud[0..3], &base[27 * 28 * 3..27 * 28 * 3 + 3]);
    }

    #[test]
    fn hsv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (r, g, b) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let (h, s, v) = rgb_to_hsv(r, g, b);
            let (r2, g2, b2) = hsv_to_rgb(h, s, v);
            assert!((r - r2).abs() < 1e-12 && (g - g2).abs() < 1e-12 && (b - b2).abs() < 1e-12);
        }
        assert_eq!(hsv_to_rgb(1.0 / 3.0, 1.0, 1.0), (0.0, 1.0, 0.0));
    }

    #[test]
    fn eval_is_pure_center_crop() {
        let img = checker();
        let a = preprocess_eval(&img);
        assert_eq!(a, preprocess_eval(&img));
        let mut want = crop(&img, 28, (2, 2));
        standardize(&mut want);
        assert_eq!(a.data(), &want[..]);
        assert_eq!(crop(&img, 28, (2, 2))[0], img.at(2, 2, 0) as f32 / 255.0);
    }

    #[test]
    fn constant_image_standardizes_to_zero() {
        let img = LabeledImage::new(vec![77; RECORD_PIXELS], 1).unwrap();
        assert!(preprocess_eval(&img).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilinear_examples() {
        let t = Tensor::from_vec(&[2, 2, 1], vec![0.0f32, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(bilinear_resize(&t, 2, 2).unwrap(), t);
        assert_eq!(bilinear_resize(&t, 1, 1).unwrap().data(), &[1.5]);
        let k = Tensor::full(&[5, 7, 2], 0.25f32).unwrap();
        let r = bilinear_resize(&k, 9, 3).unwrap();
        assert!(r.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));
        let up = bilinear_resize(&t, 4, 4).unwrap();
        assert!(up.data().iter().all(|&v| (0.0..=3.0).contains(&v)));
        assert_eq!(up.data()[0], 0.0);
        assert!(bilinear_resize(&t, 0, 1).is_err());
    }

    #[test]
    fn eval_resize_path() {
        let t = preprocess_eval_sized(&checker(), 28, 14, 14).unwrap();
        assert_eq!(t.shape(), &[14, 14, 3]);
    }

    #[test]
    fn config_validation() {
        AugmentConfig::default().validate().unwrap();
        let bad = AugmentConfig {
            crop: 33,
            ..AugmentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AugmentConfig {
            flip_lr: 1.5,
            ..AugmentConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
