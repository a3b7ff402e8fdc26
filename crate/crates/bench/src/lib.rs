//! Fixtures shared by the benchmarks.

use elastic_core::data::{gen_synthetic, Dataset, SyntheticSpec};
use elastic_core::{CommPeriod, Hyperparams, Minibatch, Model, ParamVector};

/// A standard synthetic dataset with `n_features` dimensions.
pub fn dataset(n_samples: usize, n_features: usize, seed: u64) -> Dataset {
    gen_synthetic(&SyntheticSpec {
        n_samples,
        n_features,
        ..SyntheticSpec::standard(seed)
    })
    .expect("standard separation is feasible")
}

/// The first `batch` rows of a fresh dataset.
pub fn minibatch(batch: usize, n_features: usize) -> Minibatch {
    let ds = dataset(batch.max(2), n_features, 1);
    let idx: Vec<usize> = (0..batch).collect();
    ds.minibatch(&idx).expect("indices are in range")
}

/// Deterministic pseudo-random vector of length `dim`.
pub fn vector(dim: usize, phase: f32) -> ParamVector {
    ParamVector::new(
        (0..dim)
            .map(|i| ((i as f32) * 0.618 + phase).sin())
            .collect(),
    )
    .expect("finite values")
}

pub fn hyper(tau: u64, i_max: u64) -> Hyperparams {
    Hyperparams {
        eta: 0.1,
        alpha: 0.1,
        period: CommPeriod::Fixed { tau },
        batch_size: 32,
        i_max,
        weight_decay: 0.0,
    }
}

pub fn models(n_features: usize) -> Vec<Model> {
    vec![
        Model::softmax(n_features, 2).expect("valid dimensions"),
        Model::mlp(n_features, vec![32], 2).expect("valid dimensions"),
    ]
}
