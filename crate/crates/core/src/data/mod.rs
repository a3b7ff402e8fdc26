//! Datasets, synthetic generation, partitioning and the DSHD shard format.

mod csv;
mod shard;
mod synthetic;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::optim::Minibatch;

pub use self::csv::{load_csv, read_csv, write_csv};
pub use self::shard::{
    read_shard, shard_file_len, write_shard, DataShard, SHARD_HEADER_LEN, SHARD_MAGIC,
    SHARD_VERSION,
};
pub use self::synthetic::{gen_synthetic, synthetic_centroids, SyntheticSpec};

/// Labelled samples, stored row-major as f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f32>,
    labels: Vec<u32>,
    n_features: usize,
    n_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f32>,
        labels: Vec<u32>,
        n_features: usize,
        n_classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("dataset must contain at least one sample"));
        }
        if n_features == 0 || features.len() != labels.len() * n_features {
            return Err(invalid(format!(
                "{} feature values do not form {} rows of width {n_features}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l as usize >= n_classes) {
            return Err(Error::LabelOutOfRange { label, n_classes });
        }
        Ok(Self {
            features,
            labels,
            n_features,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.features.chunks_exact(self.n_features)
    }

    /// New dataset made of the given rows, in order. Keeps `n_classes`.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(invalid(format!(
                    "row {i} out of range for {} samples",
                    self.len()
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(features, labels, self.n_features, self.n_classes)
    }

    pub fn minibatch(&self, indices: &[usize]) -> Result<Minibatch> {
        let sub = self.select(indices)?;
        Minibatch::new(sub.features, sub.labels, self.n_features)
    }
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Seeded shuffle followed by a contiguous split into `n` shards whose
/// sizes differ by at most one (larger shards first).
pub fn partition(ds: &Dataset, n: usize, seed: u64) -> Result<Vec<DataShard>> {
    if n == 0 || n > ds.len() {
        return Err(invalid(format!(
            "cannot split {} samples into {n} partitions",
            ds.len()
        )));
    }
    let order = shuffled_indices(ds.len(), seed);
    let base = ds.len() / n;
    let extra = ds.len() % n;
    let mut start = 0;
    (0..n)
        .map(|k| {
            let size = base + usize::from(k < extra);
            let part = &order[start..start + size];
            start += size;
            Ok(DataShard {
                dataset: ds.select(part)?,
                seed,
            })
        })
        .collect()
}

/// Seeded split into `(train, test)` where the test part holds
/// `round(len * test_fraction)` samples (at least one of each side).
pub fn train_test_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if ds.len() < 2 {
        return Err(invalid("need at least two samples to split"));
    }
    let n_test = ((ds.len() as f64 * test_fraction).round() as usize).clamp(1, ds.len() - 1);
    let order = shuffled_indices(ds.len(), seed);
    let (test, train) = order.split_at(n_test);
    Ok((ds.select(train)?, ds.select(test)?))
}
