//! CIFAR-10 / CIFAR-100 binary batches.
//!
//! CIFAR-10 records are 3073 bytes: one label byte then 3072 pixel bytes, the
//! red, green and blue 32x32 planes in row-major order. CIFAR-100 records carry
//! a coarse and a fine label byte before the same 3072 pixels.

use std::fs;
use std::path::{Path, PathBuf};

use super::{read_file, LabeledImageSet, Split};
use crate::error::{Error, Result};

pub const PIXELS: usize = 3 * 32 * 32;
pub const CIFAR10_RECORD: usize = 1 + PIXELS;
pub const CIFAR100_RECORD: usize = 2 + PIXELS;
pub const RECORDS_PER_CIFAR10_FILE: usize = 10_000;
pub const CIFAR100_TRAIN_RECORDS: usize = 50_000;
pub const CIFAR100_TEST_RECORDS: usize = 10_000;

const CIFAR10_NAMES: [&str; 10] = [
    "airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck",
];

fn check_length(bytes: &[u8], record: usize) -> Result<usize> {
    let rem = bytes.len() % record;
    if rem != 0 {
        let offset = bytes.len() - rem;
        return Err(Error::Format(format!(
            "truncated record at byte offset {offset}: {rem} of {record} bytes present"
        )));
    }
    Ok(bytes.len() / record)
}

fn empty_set(num_classes: usize, class_names: Vec<String>, split: Split, capacity: usize) -> LabeledImageSet {
    LabeledImageSet {
        images: Vec::with_capacity(capacity * PIXELS),
        labels: Vec::with_capacity(capacity),
        coarse_labels: None,
        channels: 3,
        height: 32,
        width: 32,
        num_classes,
        class_names,
        split,
    }
}

/// Parses a buffer of concatenated CIFAR-10 records.
pub fn parse_cifar10(bytes: &[u8], split: Split) -> Result<LabeledImageSet> {
    let count = check_length(bytes, CIFAR10_RECORD)?;
    let names = CIFAR10_NAMES.iter().map(|s| s.to_string()).collect();
    let mut set = empty_set(10, names, split, count);
    for (i, rec) in bytes.chunks_exact(CIFAR10_RECORD).enumerate() {
        let label = rec[0] as usize;
        if label > 9 {
            return Err(Error::Data(format!("record {i}: label {label} exceeds 9")));
        }
        set.labels.push(label);
        set.images.extend_from_slice(&rec[1..]);
    }
    Ok(set)
}

/// Parses CIFAR-100 records; targets are the fine labels.
pub fn parse_cifar100(bytes: &[u8], split: Split) -> Result<LabeledImageSet> {
    let count = check_length(bytes, CIFAR100_RECORD)?;
    let mut set = empty_set(100, (0..100).map(|i| format!("class{i}")).collect(), split, count);
    let mut coarse = Vec::with_capacity(count);
    for (i, rec) in bytes.chunks_exact(CIFAR100_RECORD).enumerate() {
        let (c, f) = (rec[0] as usize, rec[1] as usize);
        if c >= 20 || f >= 100 {
            return Err(Error::Data(format!("record {i}: labels coarse={c} fine={f} out of range")));
        }
        coarse.push(c);
        set.labels.push(f);
        set.images.extend_from_slice(&rec[2..]);
    }
    set.coarse_labels = Some(coarse);
    Ok(set)
}

fn read_exact_records(path: &Path, record: usize, expected: usize) -> Result<Vec<u8>> {
    let bytes = read_file(path)?;
    if bytes.len() != record * expected {
        return Err(Error::Format(format!(
            "{}: expected {} bytes ({expected} records of {record}), found {}",
            path.display(),
            record * expected,
            bytes.len()
        )));
    }
    Ok(bytes)
}

/// Accepts either the batch directory itself or its parent.
fn resolve(dir: &Path, sub: &str, probe: &str) -> PathBuf {
    if dir.join(probe).exists() {
        dir.to_path_buf()
    } else {
        dir.join(sub)
    }
}

fn read_names(path: &Path) -> Option<Vec<String>> {
    let text = fs::read_to_string(path).ok()?;
    let names: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    Some(names)
}

fn merge(mut parts: Vec<LabeledImageSet>) -> LabeledImageSet {
    let mut first = parts.remove(0);
    for p in parts {
        first.images.extend(p.images);
        first.labels.extend(p.labels);
    }
    first
}

pub fn load_cifar10(dir: impl AsRef<Path>) -> Result<(LabeledImageSet, LabeledImageSet)> {
    load_cifar10_with(dir, RECORDS_PER_CIFAR10_FILE)
}

/// Like [`load_cifar10`] with a custom number of records per batch file.
pub fn load_cifar10_with(dir: impl AsRef<Path>, records_per_file: usize) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let dir = resolve(dir.as_ref(), "cifar-10-batches-bin", "data_batch_1.bin");
    let mut parts = Vec::with_capacity(5);
    for i in 1..=5 {
        let bytes = read_exact_records(&dir.join(format!("data_batch_{i}.bin")), CIFAR10_RECORD, records_per_file)?;
        parts.push(parse_cifar10(&bytes, Split::Train)?);
    }
    let mut train = merge(parts);
    let bytes = read_exact_records(&dir.join("test_batch.bin"), CIFAR10_RECORD, records_per_file)?;
    let mut test = parse_cifar10(&bytes, Split::Test)?;
    if let Some(names) = read_names(&dir.join("batches.meta.txt")).filter(|n| n.len() == 10) {
        train.class_names = names.clone();
        test.class_names = names;
    }
    Ok((train, test))
}

pub fn load_cifar100(dir: impl AsRef<Path>) -> Result<(LabeledImageSet, LabeledImageSet)> {
    load_cifar100_with(dir, CIFAR100_TRAIN_RECORDS, CIFAR100_TEST_RECORDS)
}

pub fn load_cifar100_with(
    dir: impl AsRef<Path>,
    train_records: usize,
    test_records: usize,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let dir = resolve(dir.as_ref(), "cifar-100-binary", "train.bin");
    let train_bytes = read_exact_records(&dir.join("train.bin"), CIFAR100_RECORD, train_records)?;
    let test_bytes = read_exact_records(&dir.join("test.bin"), CIFAR100_RECORD, test_records)?;
    let mut train = parse_cifar100(&train_bytes, Split::Train)?;
    let mut test = parse_cifar100(&test_bytes, Split::Test)?;
    if let Some(names) = read_names(&dir.join("fine_label_names.txt")).filter(|n| n.len() == 100) {
        train.class_names = names.clone();
        test.class_names = names;
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record10(label: u8, pixel: u8) -> Vec<u8> {
        let mut r = vec![label];
        r.extend(std::iter::repeat(pixel).take(PIXELS));
        r
    }

    #[test]
    fn parses_constructed_record() {
        let set = parse_cifar10(&record10(7, 128), Split::Train).unwrap();
        assert_eq!(set.labels, vec![7]);
        assert!(set.image(0).iter().all(|&p| p == 128));
    }

    #[test]
    fn channel_major_pixel_order() {
        let mut r = vec![0u8];
        r.extend((0..PIXELS).map(|i| (i / 1024) as u8));
        let set = parse_cifar10(&r, Split::Test).unwrap();
        let img = set.image(0);
        assert_eq!((img[0], img[1024], img[2048]), (0, 1, 2));
    }

    #[test]
    fn truncated_reports_offset() {
        let mut bytes = record10(1, 0);
        bytes.extend(record10(2, 0));
        bytes.truncate(CIFAR10_RECORD + 100);
        let err = parse_cifar10(&bytes, Split::Train).unwrap_err();
        assert!(matches!(&err, Error::Format(m) if m.contains("offset 3073")), "{err}");
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(parse_cifar10(&record10(10, 0), Split::Train), Err(Error::Data(_))));
    }

    #[test]
    fn cifar100_uses_fine_labels() {
        let mut r = vec![3u8, 42];
        r.extend(std::iter::repeat(9).take(PIXELS));
        let set = parse_cifar100(&r, Split::Train).unwrap();
        assert_eq!(set.labels, vec![42]);
        assert_eq!(set.coarse_labels, Some(vec![3]));
        assert_eq!(set.num_classes, 100);
        let mut bad = r.clone();
        bad[1] = 100;
        assert!(parse_cifar100(&bad, Split::Train).is_err());
    }
}
