use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::idx::{load_idx, load_labels};
use crate::error::{Error, Result};

/// Images held out from the end of the training file for validation.
pub const VALIDATION_SIZE: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Images flattened row-major, scaled to [0, 1].
#[derive(Clone, Debug)]
pub struct Dataset {
    pub images: Vec<f64>,
    pub labels: Vec<usize>,
    pub height: usize,
    pub width: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.height * self.width
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.sample_len();
        &self.images[i * n..(i + 1) * n]
    }

    /// First `n` samples.
    pub fn truncated(mut self, n: usize) -> Self {
        let n = n.min(self.len());
        self.images.truncate(n * self.sample_len());
        self.labels.truncate(n);
        self
    }
}

/// MNIST in its four uncompressed IDX files under `root`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetHandle {
    pub root: PathBuf,
    pub split: Split,
}

impl DatasetHandle {
    pub fn new(root: impl Into<PathBuf>, split: Split) -> Self {
        Self {
            root: root.into(),
            split,
        }
    }

    fn files(&self) -> (PathBuf, PathBuf) {
        let prefix = match self.split {
            Split::Train | Split::Validation => "train",
            Split::Test => "t10k",
        };
        (
            self.root.join(format!("{prefix}-images-idx3-ubyte")),
            self.root.join(format!("{prefix}-labels-idx1-ubyte")),
        )
    }

    pub fn exists(&self) -> bool {
        let (i, l) = self.files();
        i.is_file() && l.is_file()
    }

    pub fn load(&self) -> Result<Dataset> {
        let (img_path, lbl_path) = self.files();
        for p in [&img_path, &lbl_path] {
            if !p.is_file() {
                return Err(Error::DatasetMissing(p.clone()));
            }
        }
        let images = load_idx(&img_path)?;
        let labels = load_labels(&lbl_path)?;
        let &[n, height, width] = images.shape() else {
            return Err(Error::shape("image file must be three-dimensional"));
        };
        if labels.len() != n {
            return Err(Error::shape(format!("{n} images but {} labels", labels.len())));
        }
        let mut ds = Dataset {
            images: images.into_data(),
            labels,
            height,
            width,
        };
        let len = height * width;
        match self.split {
            Split::Test => {}
            Split::Train => {
                let keep = n.saturating_sub(VALIDATION_SIZE);
                ds.images.truncate(keep * len);
                ds.labels.truncate(keep);
            }
            Split::Validation => {
                let start = n.saturating_sub(VALIDATION_SIZE);
                ds.images.drain(..start * len);
                ds.labels.drain(..start);
            }
        }
        Ok(ds)
    }
}

/// `MNIST_DIR` if set, otherwise `data/mnist` under `base`.
pub fn default_mnist_dir(base: &Path) -> PathBuf {
    std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| base.join("data").join("mnist"))
}

#[cfg(test)]
mod tests {
    use super::super::idx::{encode_idx, IDX_IMAGES, IDX_LABELS};
    use super::*;

    fn fixture(n: usize) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let img: Vec<u8> = (0..n * 4).map(|i| (i / 4) as u8).collect();
        let lbl: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        for prefix in ["train", "t10k"] {
            std::fs::write(
                dir.path().join(format!("{prefix}-images-idx3-ubyte")),
                encode_idx(IDX_IMAGES, &[n, 2, 2], &img),
            )
            .unwrap();
            std::fs::write(
                dir.path().join(format!("{prefix}-labels-idx1-ubyte")),
                encode_idx(IDX_LABELS, &[n], &lbl),
            )
            .unwrap();
        }
        dir
    }

    #[test]
    fn splits_partition_the_training_file() {
        let dir = fixture(VALIDATION_SIZE + 7);
        let train = DatasetHandle::new(dir.path(), Split::Train).load().unwrap();
        let val = DatasetHandle::new(dir.path(), Split::Validation).load().unwrap();
        let test = DatasetHandle::new(dir.path(), Split::Test).load().unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(val.len(), VALIDATION_SIZE);
        assert_eq!(test.len(), VALIDATION_SIZE + 7);
        assert_eq!(val.labels[0], 7);
        assert_eq!(val.image(0)[0], 7.0 / 255.0);
    }

    #[test]
    fn missing_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            DatasetHandle::new(dir.path(), Split::Test).load(),
            Err(Error::DatasetMissing(_))
        ));
    }
}
