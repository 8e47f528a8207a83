//! IDX files as used by (Fashion-)MNIST, optionally gzip-compressed.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use super::{read_file, LabeledImageSet, Split};
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

const FASHION_NAMES: [&str; 10] = [
    "t-shirt/top", "trouser", "pullover", "dress", "coat", "sandal", "shirt", "sneaker", "bag", "ankle boot",
];

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("idx header truncated at byte {at}")))
}

/// Gunzips when the buffer starts with the gzip magic, otherwise passes through.
pub fn decompress(bytes: Vec<u8>) -> Result<Vec<u8>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

/// Images of dims `(count, rows, cols)` and their pixel bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "idx images: magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "idx images: header ({count}, {rows}, {cols}) needs {expected} bytes, found {}",
            bytes.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "idx labels: magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    if bytes.len() != 8 + count {
        return Err(Error::Format(format!(
            "idx labels: header count {count} needs {} bytes, found {}",
            8 + count,
            bytes.len()
        )));
    }
    Ok(bytes[8..].to_vec())
}

fn find(dir: &Path, stem: &str) -> Result<PathBuf> {
    for candidate in [dir.join(stem), dir.join(format!("{stem}.gz"))] {
        if candidate.exists() {
            return Ok(candidate);
        }
    }
    Err(Error::Io {
        path: dir.join(stem).display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "neither raw nor .gz file present"),
    })
}

/// Reads an image/label IDX pair into one labelled set.
pub fn load_idx_pair(images: &Path, labels: &Path, split: Split) -> Result<LabeledImageSet> {
    let img = parse_idx_images(&decompress(read_file(images)?)?)?;
    let lab = parse_idx_labels(&decompress(read_file(labels)?)?)?;
    if img.count != lab.len() {
        return Err(Error::Data(format!(
            "{} holds {} images but {} holds {} labels",
            images.display(),
            img.count,
            labels.display(),
            lab.len()
        )));
    }
    if (img.rows, img.cols) != (28, 28) {
        return Err(Error::Format(format!(
            "{}: images are {}x{}, expected 28x28",
            images.display(),
            img.rows,
            img.cols
        )));
    }
    let set = LabeledImageSet {
        images: img.pixels,
        labels: lab.into_iter().map(usize::from).collect(),
        coarse_labels: None,
        channels: 1,
        height: img.rows,
        width: img.cols,
        num_classes: 10,
        class_names: FASHION_NAMES.iter().map(|s| s.to_string()).collect(),
        split,
    };
    set.validate()?;
    Ok(set)
}

/// Reads the four Fashion-MNIST files from `dir` or its `fashion-mnist` subdirectory.
pub fn load_fashion_mnist(dir: impl AsRef<Path>) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let root = dir.as_ref();
    let nested = root.join("fashion-mnist");
    let dir = if find(root, "train-images-idx3-ubyte").is_err() && nested.is_dir() { nested.as_path() } else { root };
    let train = load_idx_pair(
        &find(dir, "train-images-idx3-ubyte")?,
        &find(dir, "train-labels-idx1-ubyte")?,
        Split::Train,
    )?;
    let test = load_idx_pair(
        &find(dir, "t10k-images-idx3-ubyte")?,
        &find(dir, "t10k-labels-idx1-ubyte")?,
        Split::Test,
    )?;
    Ok((train, test))
}
