//! Seeded synthetic datasets for tests and benchmarks.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Dataset, DatasetMeta};

/// k Gaussian blobs in d dimensions, `separation` apart along coordinate
/// directions, with balanced labels.
pub fn gaussian_blobs(d: usize, n: usize, k: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let labels: Vec<usize> = (0..n).map(|j| j % k).collect();
    let features = DMatrix::from_fn(d, n, |i, j| {
        let shift = if i % k == labels[j] { separation } else { 0.0 };
        let noise: f64 = normal.sample(&mut rng);
        shift + noise
    });
    Dataset::new(features, labels, k, None, DatasetMeta::default())
        .expect("generated dataset is valid")
}

/// A planted-feature classification dataset: `n_informative` features carry
/// class-dependent means, the remaining `n_noise` are pure N(0, 1) noise.
/// Feature rows are shuffled; returns the dataset and the (shuffled) indices
/// of the informative features.
pub fn planted_features(
    n_informative: usize,
    n_noise: usize,
    n: usize,
    k: usize,
    seed: u64,
) -> (Dataset, Vec<usize>) {
    let d = n_informative + n_noise;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let labels: Vec<usize> = (0..n).map(|j| j % k).collect();

    // Class-dependent means for informative rows, drawn once per (row, class).
    let means = DMatrix::from_fn(n_informative, k, |_, _| {
        let v: f64 = normal.sample(&mut rng);
        2.5 * v.signum() + v
    });

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    for i in 0..n_informative {
        rows.push(
            (0..n)
                .map(|j| {
                    let noise: f64 = normal.sample(&mut rng);
                    means[(i, labels[j])] + noise
                })
                .collect(),
        );
    }
    for _ in 0..n_noise {
        rows.push((0..n).map(|_| normal.sample(&mut rng)).collect());
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    let features = DMatrix::from_fn(d, n, |i, j| rows[order[i]][j]);
    let informative: Vec<usize> = (0..d).filter(|&i| order[i] < n_informative).collect();

    let ds = Dataset::new(features, labels, k, None, DatasetMeta::default())
        .expect("generated dataset is valid");
    (ds, informative)
}

/// A random regression pair (X, Y) with a planted low-rank signal:
/// Y = W*ᵀX + noise for a random orthonormal W*. Used to exercise the solver
/// across shapes without any classification structure.
pub fn regression_pair(
    d: usize,
    n: usize,
    k: usize,
    noise: f64,
    seed: u64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    dominant_rows_regression(d, n, k, 0, 1.0, noise, seed)
}

/// [`regression_pair`] with the first `n_dominant` feature rows scaled by
/// `scale`, giving the data matrix a few dominant directions the way raw
/// features with heterogeneous units do.
pub fn dominant_rows_regression(
    d: usize,
    n: usize,
    k: usize,
    n_dominant: usize,
    scale: f64,
    noise: f64,
    seed: u64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut x = DMatrix::from_fn(d, n, |_, _| normal.sample(&mut rng));
    for i in 0..n_dominant.min(d) {
        for j in 0..n {
            x[(i, j)] *= scale;
        }
    }
    let w_star = crate::optimizer::init_stiefel(d, k, seed.wrapping_add(1))
        .expect("d >= k")
        .into_matrix();
    let y = w_star.transpose() * &x
        + DMatrix::from_fn(k, n, |_, _| {
            let v: f64 = normal.sample(&mut rng);
            noise * v
        });
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_shape_and_balance() {
        let ds = gaussian_blobs(3, 90, 3, 2.0, 0);
        assert_eq!(ds.n_features(), 3);
        assert_eq!(ds.n_samples(), 90);
        assert_eq!(ds.class_counts(), vec![30, 30, 30]);
    }

    #[test]
    fn planted_reports_informative_indices() {
        let (ds, informative) = planted_features(5, 15, 100, 3, 1);
        assert_eq!(ds.n_features(), 20);
        assert_eq!(informative.len(), 5);
        let (ds2, informative2) = planted_features(5, 15, 100, 3, 1);
        assert_eq!(informative, informative2);
        assert_eq!(ds.features(), ds2.features());
    }

    #[test]
    fn regression_pair_shapes() {
        let (x, y) = regression_pair(10, 50, 3, 0.1, 2);
        assert_eq!((x.nrows(), x.ncols()), (10, 50));
        assert_eq!((y.nrows(), y.ncols()), (3, 50));
    }
}
