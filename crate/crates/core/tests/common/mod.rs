#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;
use lrunet::data::{parse_cifar10, LabeledImageSet, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `count` CIFAR-10 records with uniform random pixels and labels cycling 0..10.
pub fn cifar10_bytes(count: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count * 3073);
    for i in 0..count {
        out.push((i % 10) as u8);
        out.extend((0..3072).map(|_| rng.gen::<u8>()));
    }
    out
}

pub fn cifar10_set(count: usize, seed: u64) -> LabeledImageSet {
    parse_cifar10(&cifar10_bytes(count, seed), Split::Train).unwrap()
}

pub fn idx_images(count: usize, rows: usize, cols: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Vec::new();
    for v in [0x803u32, count as u32, rows as u32, cols as u32] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend((0..count * rows * cols).map(|_| rng.gen::<u8>()));
    b
}

pub fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = 0x801u32.to_be_bytes().to_vec();
    b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    b.extend_from_slice(labels);
    b
}

pub fn gzip(bytes: &[u8]) -> Vec<u8> {
    let mut enc = GzEncoder::new(Vec::new(), Compression::fast());
    enc.write_all(bytes).unwrap();
    enc.finish().unwrap()
}

/// Writes a Fashion-MNIST-layout directory of random 28x28 images.
pub fn write_fashion(dir: &Path, train: usize, test: usize, seed: u64, gz: bool) {
    let files = [
        ("train-images-idx3-ubyte", idx_images(train, 28, 28, seed)),
        ("train-labels-idx1-ubyte", idx_labels(&(0..train).map(|i| (i % 10) as u8).collect::<Vec<_>>())),
        ("t10k-images-idx3-ubyte", idx_images(test, 28, 28, seed + 1)),
        ("t10k-labels-idx1-ubyte", idx_labels(&(0..test).map(|i| (i % 10) as u8).collect::<Vec<_>>())),
    ];
    for (name, bytes) in files {
        if gz {
            std::fs::write(dir.join(format!("{name}.gz")), gzip(&bytes)).unwrap();
        } else {
            std::fs::write(dir.join(name), bytes).unwrap();
        }
    }
}
