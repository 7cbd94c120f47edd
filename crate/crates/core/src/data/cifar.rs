//! The CIFAR-10 binary layout: each record is one label byte followed by
//! 3072 pixel bytes (1024 red, 1024 green, 1024 blue, rows top to bottom).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGE_SIDE: usize = 32;
pub const CHANNELS: usize = 3;
pub const RECORD_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE * CHANNELS;
pub const RECORD_BYTES: usize = RECORD_PIXELS + 1;
pub const CLASSES: usize = 10;

pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

/// One 32×32 RGB image with its class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    /// Channel-major bytes exactly as stored on disk.
    pub pixels: Vec<u8>,
    pub label: u8,
}

impl LabeledImage {
    pub fn new(pixels: Vec<u8>, label: u8) -> Result<Self> {
        if pixels.len() != RECORD_PIXELS {
            return Err(Error::Data(format!(
                "image needs {RECORD_PIXELS} bytes, got {}",
                pixels.len()
            )));
        }
        if label as usize >= CLASSES {
            return Err(Error::Data(format!("label {label} out of range 0..{CLASSES}")));
        }
        Ok(Self { pixels, label })
    }

    /// Pixel at row `y`, column `x`, channel `c`.
    pub fn at(&self, y: usize, x: usize, c: usize) -> u8 {
        self.pixels[c * IMAGE_SIDE * IMAGE_SIDE + y * IMAGE_SIDE + x]
    }

    /// Interleaved `32×32×3` values scaled to `[0, 1]`.
    pub fn to_hwc(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(RECORD_PIXELS);
        for y in 0..IMAGE_SIDE {
            for x in 0..IMAGE_SIDE {
                for c in 0..CHANNELS {
                    out.push(self.at(y, x, c) as f32 / 255.0);
                }
            }
        }
        out
    }
}

/// Decodes a whole batch file held in memory.
pub fn parse_cifar(bytes: &[u8]) -> Result<Vec<LabeledImage>> {
    let whole = bytes.len() / RECORD_BYTES * RECORD_BYTES;
    if whole != bytes.len() {
        return Err(Error::Data(format!(
            "truncated record at byte offset {whole}: {} of {RECORD_BYTES} bytes present",
            bytes.len() - whole
        )));
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            if rec[0] as usize >= CLASSES {
                return Err(Error::Data(format!(
                    "corrupt record {i} at byte offset {}: label {} >= {CLASSES}",
                    i * RECORD_BYTES,
                    rec[0]
                )));
            }
            Ok(LabeledImage {
                pixels: rec[1..].to_vec(),
                label: rec[0],
            })
        })
        .collect()
}

pub fn encode_cifar(images: &[LabeledImage]) -> Vec<u8> {
    let mut out = Vec::with_capacity(images.len() * RECORD_BYTES);
    for img in images {
        out.push(img.label);
        out.extend_from_slice(&img.pixels);
    }
    out
}

pub fn load_cifar_batch(path: &Path) -> Result<Vec<LabeledImage>> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_cifar(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn write_cifar_batch(path: &Path, images: &[LabeledImage]) -> Result<()> {
    fs::write(path, encode_cifar(images))?;
    Ok(())
}

/// Loads the five training files and the test file from `dir`.
pub fn load_cifar_dir(dir: &Path) -> Result<(Vec<LabeledImage>, Vec<LabeledImage>)> {
    let mut train = Vec::new();
    for name in TRAIN_FILES {
        train.extend(load_cifar_batch(&dir.join(name))?);
    }
    let test = load_cifar_batch(&dir.join(TEST_FILE))?;
    Ok((train, test))
}
