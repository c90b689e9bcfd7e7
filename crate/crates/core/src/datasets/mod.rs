//! Dataset ingestion, a synthetic stand-in corpus and client partitioning.
//!
//! Labels are 0-based everywhere in the library.

mod idx;

pub use idx::{is_known_type, parse_idx, serialize_idx, IdxTensor};

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hdc::Sample;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub rows: usize,
    pub cols: usize,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, rows: usize, cols: usize, num_classes: usize) -> Result<Self> {
        let pixels = rows * cols;
        for s in &samples {
            if s.pixels.len() != pixels {
                return Err(Error::DimensionMismatch { expected: pixels, found: s.pixels.len() });
            }
            if s.label >= num_classes {
                return Err(Error::LabelOutOfRange { label: s.label, classes: num_classes });
            }
        }
        Ok(Dataset { samples, rows, cols, num_classes })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn pixels_per_sample(&self) -> usize {
        self.rows * self.cols
    }

    /// First `n` samples (or all of them).
    pub fn truncated(&self, n: usize) -> Dataset {
        Dataset { samples: self.samples[..n.min(self.len())].to_vec(), ..*self }
    }

    pub fn subset<'a>(&'a self, indices: &'a [usize]) -> impl Iterator<Item = &'a Sample> + 'a {
        indices.iter().map(move |&i| &self.samples[i])
    }
}

/// Build a dataset from an image tensor (`n x rows x cols`) and a label
/// vector (`n`).
pub fn dataset_from_idx(images: &IdxTensor, labels: &IdxTensor, num_classes: usize) -> Result<Dataset> {
    let &[n, rows, cols] = images.shape.as_slice() else {
        return Err(Error::Malformed(format!("image tensor must be 3-D, got shape {:?}", images.shape)));
    };
    let &[m] = labels.shape.as_slice() else {
        return Err(Error::Malformed(format!("label tensor must be 1-D, got shape {:?}", labels.shape)));
    };
    if n != m {
        return Err(Error::CountMismatch { images: n, labels: m });
    }
    let px = rows * cols;
    let samples = labels
        .data
        .iter()
        .enumerate()
        .map(|(i, &label)| Sample { pixels: images.data[i * px..(i + 1) * px].to_vec(), label: label as usize })
        .collect();
    Dataset::new(samples, rows, cols, num_classes)
}

pub fn load_mnist(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = parse_idx(&std::fs::read(images_path)?)?;
    let labels = parse_idx(&std::fs::read(labels_path)?)?;
    dataset_from_idx(&images, &labels, 10)
}

/// Train and test splits from a directory holding the four standard
/// uncompressed MNIST files.
pub fn load_mnist_dir(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let train = load_mnist(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?;
    let test = load_mnist(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))?;
    Ok((train, test))
}

/// `num_classes` random template images; each sample is its class template
/// with every pixel independently replaced by a uniform random intensity
/// with probability `noise_level`. Samples are emitted class by class.
pub fn synthetic_dataset(
    seed: u64,
    num_classes: usize,
    per_class: usize,
    rows: usize,
    cols: usize,
    noise_level: f64,
) -> Result<Dataset> {
    if num_classes == 0 || per_class == 0 || rows == 0 || cols == 0 {
        return Err(Error::invalid("synthetic dataset counts must be >= 1"));
    }
    if !(0.0..=1.0).contains(&noise_level) {
        return Err(Error::invalid(format!("noise level must lie in [0, 1], got {noise_level}")));
    }
    let px = rows * cols;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates: Vec<Vec<u8>> = (0..num_classes).map(|_| (0..px).map(|_| rng.gen()).collect()).collect();
    let mut samples = Vec::with_capacity(num_classes * per_class);
    for (label, template) in templates.iter().enumerate() {
        for _ in 0..per_class {
            let pixels = template.iter().map(|&p| if rng.gen_bool(noise_level) { rng.gen() } else { p }).collect();
            samples.push(Sample { pixels, label });
        }
    }
    Dataset::new(samples, rows, cols, num_classes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum PartitionScheme {
    Iid,
    NonIid { shards_per_user: usize },
}

/// Sample indices held by each user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub assignments: Vec<Vec<usize>>,
}

impl Partition {
    pub fn num_users(&self) -> usize {
        self.assignments.len()
    }

    pub fn user(&self, i: usize) -> &[usize] {
        &self.assignments[i]
    }
}

pub fn partition(dataset: &Dataset, users: usize, scheme: PartitionScheme, seed: u64) -> Result<Partition> {
    match scheme {
        PartitionScheme::Iid => partition_iid(dataset, users, seed),
        PartitionScheme::NonIid { shards_per_user } => partition_noniid(dataset, users, shards_per_user, seed),
    }
}

/// Shuffle, then split into `users` contiguous blocks whose sizes differ by
/// at most one.
pub fn partition_iid(dataset: &Dataset, users: usize, seed: u64) -> Result<Partition> {
    let n = dataset.len();
    if users == 0 || users > n {
        return Err(Error::Partition(format!("cannot split {n} samples among {users} users")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / users, n % users);
    let mut start = 0;
    let assignments = (0..users)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let block = order[start..start + len].to_vec();
            start += len;
            block
        })
        .collect();
    Ok(Partition { assignments })
}

/// Sort by label, cut into `users * shards_per_user` equal shards and deal
/// each user `shards_per_user` distinct shards at random.
pub fn partition_noniid(dataset: &Dataset, users: usize, shards_per_user: usize, seed: u64) -> Result<Partition> {
    let n = dataset.len();
    let shards = users
        .checked_mul(shards_per_user)
        .filter(|&s| s > 0)
        .ok_or_else(|| Error::Partition("users and shards per user must be >= 1".into()))?;
    if !n.is_multiple_of(shards) || n < shards {
        return Err(Error::Partition(format!("{n} samples do not divide into {shards} equal shards")));
    }
    let shard_len = n / shards;
    let mut sorted: Vec<usize> = (0..n).collect();
    // stable: ties keep dataset order
    sorted.sort_by_key(|&i| dataset.samples[i].label);
    let mut shard_ids: Vec<usize> = (0..shards).collect();
    shard_ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignments = shard_ids
        .chunks(shards_per_user)
        .map(|owned| owned.iter().flat_map(|&s| sorted[s * shard_len..(s + 1) * shard_len].iter().copied()).collect())
        .collect();
    Ok(Partition { assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn synthetic_counts_and_noise_free_classes() {
        let ds = synthetic_dataset(3, 4, 25, 5, 5, 0.0).unwrap();
        assert_eq!(ds.len(), 100);
        for c in 0..4 {
            let members: Vec<_> = ds.samples.iter().filter(|s| s.label == c).collect();
            assert_eq!(members.len(), 25);
            assert!(members.iter().all(|s| s.pixels == members[0].pixels));
        }
        assert_eq!(ds, synthetic_dataset(3, 4, 25, 5, 5, 0.0).unwrap());
        let noisy = synthetic_dataset(3, 4, 25, 5, 5, 0.3).unwrap();
        assert_eq!(noisy, synthetic_dataset(3, 4, 25, 5, 5, 0.3).unwrap());
        assert_ne!(noisy, ds);
    }

    #[test]
    fn idx_to_dataset_checks_counts() {
        let images = IdxTensor::new(vec![2, 1, 2], vec![1, 2, 3, 4]).unwrap();
        let labels = IdxTensor::new(vec![2], vec![0, 9]).unwrap();
        let ds = dataset_from_idx(&images, &labels, 10).unwrap();
        assert_eq!(ds.samples[1].pixels, vec![3, 4]);
        assert_eq!(ds.samples[1].label, 9);
        let short = IdxTensor::new(vec![1], vec![0]).unwrap();
        assert!(matches!(dataset_from_idx(&images, &short, 10), Err(Error::CountMismatch { images: 2, labels: 1 })));
    }

    #[test]
    fn iid_sizes() {
        let ds = synthetic_dataset(0, 2, 5, 2, 2, 0.0).unwrap();
        let p = partition_iid(&ds, 10, 1).unwrap();
        assert!(p.assignments.iter().all(|a| a.len() == 1));
        let p = partition_iid(&ds, 3, 1).unwrap();
        let sizes: Vec<_> = p.assignments.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        assert!(partition_iid(&ds, 11, 1).is_err());
        assert!(partition_iid(&ds, 0, 1).is_err());
    }

    #[test]
    fn noniid_shards_are_label_segments() {
        let ds = synthetic_dataset(0, 10, 60, 2, 2, 0.0).unwrap();
        let p = partition_noniid(&ds, 10, 3, 5).unwrap();
        for a in &p.assignments {
            assert_eq!(a.len(), 60);
            // each shard of 20 is label-pure here, so at most 3 labels per user
            let mut labels: Vec<_> = a.iter().map(|&i| ds.samples[i].label).collect();
            labels.dedup();
            assert!(labels.len() <= 3);
        }
        assert!(partition_noniid(&ds, 7, 3, 5).is_err());
    }

    fn check_disjoint_cover(p: &Partition, n: usize) {
        let mut seen = vec![false; n];
        for &i in p.assignments.iter().flatten() {
            assert!(!seen[i], "index {i} assigned twice");
            seen[i] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_and_exhaustive(seed in any::<u64>(), users in 1usize..20) {
            let ds = synthetic_dataset(1, 3, 40, 1, 1, 0.5).unwrap();
            check_disjoint_cover(&partition_iid(&ds, users, seed).unwrap(), ds.len());
            check_disjoint_cover(&partition_noniid(&ds, 4, 3, seed).unwrap(), ds.len());
        }
    }
}
