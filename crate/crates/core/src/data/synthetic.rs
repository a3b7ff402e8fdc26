use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{invalid, Error, Result};

const PLACEMENT_ATTEMPTS: usize = 1000;

/// Gaussian blobs around seeded class centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Minimum pairwise distance between class centroids.
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The benchmark used across the end-to-end and simulator checks.
    pub fn standard(seed: u64) -> Self {
        Self {
            n_samples: 2000,
            n_features: 20,
            n_classes: 2,
            class_separation: 10.0,
            noise_sigma: 0.5,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_features == 0 {
            return Err(invalid("synthetic spec needs samples and features"));
        }
        if self.n_classes < 2 {
            return Err(invalid("synthetic spec needs at least two classes"));
        }
        if !(self.class_separation.is_finite() && self.class_separation > 0.0) {
            return Err(invalid("class separation must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid("noise sigma must be nonnegative"));
        }
        Ok(())
    }
}

/// Class centroids, placed by rejection sampling from
/// `N(0, (separation / sqrt(d))^2 I)` until each is at least `separation`
/// away from the ones placed before it.
pub fn synthetic_centroids(spec: &SyntheticSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let spread = Normal::new(0.0, spec.class_separation / (spec.n_features as f64).sqrt())
        .map_err(|e| invalid(e.to_string()))?;
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(spec.n_classes);
    for class in 0..spec.n_classes {
        let placed = (0..PLACEMENT_ATTEMPTS).find_map(|_| {
            let c: Vec<f64> = (0..spec.n_features)
                .map(|_| spread.sample(&mut rng))
                .collect();
            let far_enough = centroids.iter().all(|o| {
                let d2: f64 = o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() >= spec.class_separation
            });
            far_enough.then_some(c)
        });
        match placed {
            Some(c) => centroids.push(c),
            None => {
                return Err(Error::Generation(format!(
                    "could not place centroid {class} at separation {} in {} dimensions after {PLACEMENT_ATTEMPTS} attempts",
                    spec.class_separation, spec.n_features
                )))
            }
        }
    }
    Ok(centroids)
}

/// Balanced labels (class sizes differ by at most one) in seeded order, each
/// sample drawn as its centroid plus isotropic Gaussian noise.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let centroids = synthetic_centroids(spec)?;
    // separate stream so the centroids do not depend on n_samples
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_da7a);
    let mut labels: Vec<u32> = (0..spec.n_samples)
        .map(|i| (i % spec.n_classes) as u32)
        .collect();
    labels.shuffle(&mut rng);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| invalid(e.to_string()))?;
    let mut features = Vec::with_capacity(spec.n_samples * spec.n_features);
    for &label in &labels {
        for &c in &centroids[label as usize] {
            let v = if spec.noise_sigma == 0.0 {
                c
            } else {
                c + noise.sample(&mut rng)
            };
            features.push(v as f32);
        }
    }
    Dataset::new(features, labels, spec.n_features, spec.n_classes)
}
