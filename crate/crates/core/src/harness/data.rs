//! Dataset loaders: MNIST in IDX format and seeded Gaussian blobs.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::Dataset;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let word = bytes.get(offset..offset + 4).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        offset: bytes.len() as u64,
        message: format!("header ends early; needed 4 bytes at offset {offset}"),
    })?;
    Ok(u32::from_be_bytes(word.try_into().expect("four bytes")))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let magic = read_u32(bytes, 0, path)?;
    if magic != expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("magic number {magic:#010x}, expected {expected:#010x}"),
        });
    }
    Ok(())
}

fn check_length(bytes: &[u8], expected: usize, path: &Path) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            message: format!("truncated: file has {} bytes, header promises {expected}", bytes.len()),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: expected as u64,
            message: format!("{} trailing bytes after the last record", bytes.len() - expected),
        });
    }
    Ok(())
}

/// Decodes an IDX image/label pair held in memory. Pixels are scaled to
/// `[0, 1]`; `limit` keeps only the first samples.
pub fn decode_mnist_idx(
    image_bytes: &[u8],
    label_bytes: &[u8],
    images_path: &Path,
    labels_path: &Path,
    limit: Option<usize>,
) -> Result<Dataset> {
    check_magic(image_bytes, IMAGE_MAGIC, images_path)?;
    let count = read_u32(image_bytes, 4, images_path)? as usize;
    let rows = read_u32(image_bytes, 8, images_path)? as usize;
    let cols = read_u32(image_bytes, 12, images_path)? as usize;
    let dim = rows * cols;
    if dim == 0 {
        return Err(Error::Format {
            path: images_path.to_path_buf(),
            offset: 8,
            message: format!("image shape {rows}x{cols} is empty"),
        });
    }
    check_length(image_bytes, 16 + count * dim, images_path)?;

    check_magic(label_bytes, LABEL_MAGIC, labels_path)?;
    let label_count = read_u32(label_bytes, 4, labels_path)? as usize;
    if label_count != count {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            offset: 4,
            message: format!("{label_count} labels for {count} images"),
        });
    }
    check_length(label_bytes, 8 + count, labels_path)?;

    let keep = limit.map_or(count, |l| l.min(count));
    let labels: Vec<usize> = label_bytes[8..8 + keep].iter().map(|&b| b as usize).collect();
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            offset: (8 + pos) as u64,
            message: format!("label {} outside 0..=9", labels[pos]),
        });
    }
    let inputs: Vec<f64> = image_bytes[16..16 + keep * dim]
        .iter()
        .map(|&p| f64::from(p) / 255.0)
        .collect();
    Dataset::new(dim, 10, inputs, labels)
}

/// Reads an IDX image/label file pair from disk.
pub fn load_mnist_idx(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Dataset> {
    let image_bytes = std::fs::read(images).map_err(|e| Error::io(images, e))?;
    let label_bytes = std::fs::read(labels).map_err(|e| Error::io(labels, e))?;
    decode_mnist_idx(&image_bytes, &label_bytes, images, labels, limit)
}

/// Gaussian blobs with unit covariance. Class `c` is centred at
/// `separation / sqrt(2) * e_c`, so any two means lie `separation` apart.
/// Labels cycle through the classes before a seeded shuffle.
pub fn gen_synthetic(samples: usize, classes: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if samples == 0 || classes < 2 || dim < classes || !(separation > 0.0) {
        return Err(Error::Config(format!(
            "synthetic data needs samples >= 1, classes >= 2, dim >= classes and separation > 0; \
             got {samples}, {classes}, {dim}, {separation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..samples).collect();
    order.shuffle(&mut rng);
    let offset = separation / std::f64::consts::SQRT_2;
    let mut inputs = Vec::with_capacity(samples * dim);
    let mut labels = Vec::with_capacity(samples);
    for &i in &order {
        let label = i % classes;
        for d in 0..dim {
            let noise: f64 = StandardNormal.sample(&mut rng);
            inputs.push(noise + if d == label { offset } else { 0.0 });
        }
        labels.push(label);
    }
    Dataset::new(dim, classes, inputs, labels)
}

/// Splits off `round(fraction * n)` randomly chosen samples. Both parts keep
/// their original relative order.
pub fn split_holdout<R: Rng + ?Sized>(data: &Dataset, fraction: f64, rng: &mut R) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("holdout fraction must lie in [0, 1), got {fraction}")));
    }
    let n = data.len();
    let take = (fraction * n as f64).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut held: Vec<usize> = idx[..take].to_vec();
    let mut kept: Vec<usize> = idx[take..].to_vec();
    held.sort_unstable();
    kept.sort_unstable();
    Ok((data.subset(&kept), data.subset(&held)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_pair(count: usize, rows: usize, cols: usize) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        for w in [IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
            img.extend_from_slice(&w.to_be_bytes());
        }
        img.extend((0..count * rows * cols).map(|i| (i % 256) as u8));
        let mut lab = Vec::new();
        for w in [LABEL_MAGIC, count as u32] {
            lab.extend_from_slice(&w.to_be_bytes());
        }
        lab.extend((0..count).map(|i| (i % 10) as u8));
        (img, lab)
    }

    fn decode(img: &[u8], lab: &[u8]) -> Result<Dataset> {
        decode_mnist_idx(img, lab, Path::new("img"), Path::new("lab"), None)
    }

    fn offset_of(err: Error) -> u64 {
        match err {
            Error::Format { offset, .. } => offset,
            other => panic!("expected a format error, got {other}"),
        }
    }

    #[test]
    fn full_size_pair_decodes() {
        let (img, lab) = idx_pair(10_000, 28, 28);
        assert_eq!(img.len(), 7_840_016);
        assert_eq!(lab.len(), 10_008);
        let ds = decode(&img, &lab).unwrap();
        assert_eq!((ds.len(), ds.dim(), ds.num_classes()), (10_000, 784, 10));
        assert_eq!(ds.label(13), 3);
        assert_eq!(ds.input(0)[255], 1.0);
        assert_eq!(ds.input(0)[1], 1.0 / 255.0);
    }

    #[test]
    fn limit_keeps_a_prefix() {
        let (img, lab) = idx_pair(20, 2, 2);
        let ds = decode_mnist_idx(&img, &lab, Path::new("i"), Path::new("l"), Some(5)).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.labels(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn truncation_names_the_end_of_file() {
        let (img, lab) = idx_pair(10, 4, 4);
        assert_eq!(offset_of(decode(&img[..100], &lab).unwrap_err()), 100);
        assert_eq!(offset_of(decode(&img, &lab[..12]).unwrap_err()), 12);
        assert_eq!(offset_of(decode(&img[..6], &lab).unwrap_err()), 6);
    }

    #[test]
    fn bad_magic_and_count_mismatch() {
        let (mut img, lab) = idx_pair(10, 4, 4);
        img[3] = 0x01;
        assert_eq!(offset_of(decode(&img, &lab).unwrap_err()), 0);
        let (img, _) = idx_pair(10, 4, 4);
        let (_, lab) = idx_pair(9, 4, 4);
        let err = decode(&img, &lab).unwrap_err();
        assert!(err.to_string().contains("9 labels for 10 images"), "{err}");
        assert_eq!(offset_of(err), 4);
    }

    #[test]
    fn label_out_of_range() {
        let (img, mut lab) = idx_pair(10, 4, 4);
        lab[8 + 7] = 12;
        assert_eq!(offset_of(decode(&img, &lab).unwrap_err()), 15);
    }

    #[test]
    fn synthetic_is_seeded_and_balanced() {
        let a = gen_synthetic(400, 4, 6, 3.0, 9).unwrap();
        assert_eq!(a, gen_synthetic(400, 4, 6, 3.0, 9).unwrap());
        assert_ne!(a, gen_synthetic(400, 4, 6, 3.0, 10).unwrap());
        for c in 0..4 {
            assert_eq!(a.labels().iter().filter(|&&l| l == c).count(), 100);
        }
        // Per-class mean sits near the designated axis offset.
        let mut mean = 0.0;
        for i in 0..a.len() {
            if a.label(i) == 2 {
                mean += a.input(i)[2];
            }
        }
        mean /= 100.0;
        assert!((mean - 3.0 / std::f64::consts::SQRT_2).abs() < 0.35, "{mean}");
        assert!(gen_synthetic(10, 4, 3, 1.0, 0).is_err());
    }

    #[test]
    fn holdout_split_is_disjoint_and_sized() {
        let ds = gen_synthetic(101, 2, 2, 1.0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (train, held) = split_holdout(&ds, 0.1, &mut rng).unwrap();
        assert_eq!((train.len(), held.len()), (91, 10));
        let (train, held) = split_holdout(&ds, 0.0, &mut rng).unwrap();
        assert_eq!((train.len(), held.len()), (101, 0));
        assert!(split_holdout(&ds, 1.0, &mut rng).is_err());
    }
}
