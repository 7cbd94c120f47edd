use std::env;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use featspace::data::{load_cifar_dir, synthetic_images, LabeledImage, DATASET_ENV};

/// Seeds of the synthetic train and test sets. Fixed so that every run
/// and every variant of an ablation sees the same images.
const SYNTHETIC_TRAIN_SEED: u64 = 0x5EED_0001;
const SYNTHETIC_TEST_SEED: u64 = 0x5EED_0002;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
    /// Human-readable origin, recorded in run summaries.
    pub source: String,
}

/// Where to take images from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Cifar(PathBuf),
}

impl DataSource {
    /// `dir` if given, else the directory named by the environment variable.
    pub fn resolve(synthetic: bool, dir: Option<&Path>) -> Result<Self> {
        if synthetic {
            return Ok(DataSource::Synthetic);
        }
        if let Some(d) = dir {
            return Ok(DataSource::Cifar(d.to_path_buf()));
        }
        match env::var_os(DATASET_ENV) {
            Some(d) if !d.is_empty() => Ok(DataSource::Cifar(PathBuf::from(d))),
            _ => bail!(
                "no CIFAR-10 directory: set {DATASET_ENV}, pass --dataset, or use --synthetic"
            ),
        }
    }

    /// Loads the first `n_train` training and `n_test` test images.
    pub fn load(&self, n_train: usize, n_test: usize) -> Result<Dataset> {
        match self {
            DataSource::Synthetic => Ok(Dataset {
                train: synthetic_images(n_train, SYNTHETIC_TRAIN_SEED),
                test: synthetic_images(n_test, SYNTHETIC_TEST_SEED),
                source: "synthetic".into(),
            }),
            DataSource::Cifar(dir) => {
                let (mut train, mut test) = load_cifar_dir(dir)
                    .with_context(|| format!("loading CIFAR-10 from {}", dir.display()))?;
                if train.len() < n_train || test.len() < n_test {
                    bail!(
                        "{} holds {} train / {} test images, run needs {n_train} / {n_test}",
                        dir.display(),
                        train.len(),
                        test.len()
                    );
                }
                train.truncate(n_train);
                test.truncate(n_test);
                Ok(Dataset {
                    train,
                    test,
                    source: dir.display().to_string(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_fixed() {
        let a = DataSource::Synthetic.load(20, 10).unwrap();
        let b = DataSource::Synthetic.load(20, 10).unwrap();
        assert_eq!(a.train, b.train);
        assert_ne!(a.train[..10], a.test[..]);
    }

    #[test]
    fn explicit_dir_wins() {
        let src = DataSource::resolve(false, Some(Path::new("/x"))).unwrap();
        assert_eq!(src, DataSource::Cifar("/x".into()));
        assert_eq!(DataSource::resolve(true, Some(Path::new("/x"))).unwrap(), DataSource::Synthetic);
    }

    #[test]
    fn missing_dir_is_an_error() {
        let src = DataSource::Cifar("/definitely/not/here".into());
        assert!(src.load(1, 1).is_err());
    }
}
