//! Dataset readers for the native CIFAR and IDX formats, input
//! normalization, and checkpoint persistence.

pub mod checkpoint;
pub mod cifar;
pub mod idx;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TensorKind, TensorRecord};
pub use cifar::{load_cifar10, load_cifar100, parse_cifar10, parse_cifar100};
pub use idx::{load_fashion_mnist, parse_idx_images, parse_idx_labels};

/// Environment variable consulted for the dataset root when no directory is given.
pub const DATA_DIR_ENV: &str = "LRUNET_DATA";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Images kept as raw bytes in `(count, C, H, W)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImageSet {
    pub images: Vec<u8>,
    pub labels: Vec<usize>,
    /// CIFAR-100 superclass labels; parsed but never used as targets.
    pub coarse_labels: Option<Vec<usize>>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub split: Split,
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.images[i * n..(i + 1) * n]
    }

    pub fn validate(&self) -> Result<()> {
        if self.images.len() != self.labels.len() * self.image_len() {
            return Err(Error::Data(format!(
                "{} labels but {} image bytes ({} per image)",
                self.labels.len(),
                self.images.len(),
                self.image_len()
            )));
        }
        if let Some((i, &l)) = self.labels.iter().enumerate().find(|(_, &l)| l >= self.num_classes) {
            return Err(Error::Data(format!(
                "label {l} at record {i} out of range for {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// Copy holding only the listed samples, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut images = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        LabeledImageSet {
            images,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            coarse_labels: self.coarse_labels.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
            class_names: self.class_names.clone(),
            ..*self
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Per-channel standardization applied after scaling pixels to `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Normalization {
    pub fn identity(channels: usize) -> Self {
        Normalization {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    /// Mean and population standard deviation of each channel over the whole set.
    pub fn from_dataset(set: &LabeledImageSet) -> Self {
        let plane = set.height * set.width;
        let mut sum = vec![0f64; set.channels];
        let mut sq = vec![0f64; set.channels];
        for i in 0..set.len() {
            for (c, px) in set.image(i).chunks(plane).enumerate() {
                for &p in px {
                    let v = p as f64 / 255.0;
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
        }
        let count = (set.len() * plane).max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| ((s / count - m * m).max(0.0).sqrt().max(1e-6)) as f32)
            .collect();
        Normalization {
            mean: mean.into_iter().map(|m| m as f32).collect(),
            std,
        }
    }

    /// In-place standardization of one `(C, H, W)` image in `[0, 1]`.
    pub fn apply(&self, image: &mut [f32]) {
        let plane = image.len() / self.mean.len();
        for (c, px) in image.chunks_mut(plane).enumerate() {
            let (m, s) = (self.mean[c], self.std[c]);
            for v in px {
                *v = (*v - m) / s;
            }
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
