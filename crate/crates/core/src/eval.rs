//! Backward-elimination evaluation harness.
//!
//! Given a feature ranking, subsets of the top-s features are evaluated over
//! repeated stratified 70/30 splits with a small in-repo classifier (ridge
//! one-vs-rest or k-NN), producing an accuracy-vs-subset-size curve. Split
//! seeds are paired across subset sizes so curve differences come from the
//! features, not the partitions.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::{split, Dataset};
use crate::error::{Error, Result};
use crate::scoring::FeatureRanking;
use crate::seeds::{derive_seed, STREAM_SPLIT};

/// Classifier used to score feature subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Classifier {
    #[default]
    Linear,
    Knn,
}

/// Harness configuration.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Repeated split trials per subset size.
    pub n_trials: usize,
    pub classifier: Classifier,
    pub knn_k: usize,
    /// Ridge strength for the linear classifier.
    pub ridge: f64,
    /// Subset sizes to evaluate, strictly decreasing.
    pub elimination_schedule: Vec<usize>,
    pub base_seed: u64,
}

impl EvalConfig {
    /// Defaults: 20 trials, linear classifier, k-NN k = 5, ridge 1e-3, and
    /// the default schedule for d features.
    pub fn for_dimension(d: usize) -> Self {
        Self {
            n_trials: 20,
            classifier: Classifier::Linear,
            knn_k: 5,
            ridge: 1e-3,
            elimination_schedule: default_schedule(d),
            base_seed: 0,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.n_trials < 1 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.elimination_schedule.is_empty() {
            return Err(Error::Config("elimination schedule is empty".into()));
        }
        for pair in self.elimination_schedule.windows(2) {
            if pair[1] >= pair[0] {
                return Err(Error::Config(format!(
                    "schedule must be strictly decreasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        for &s in &self.elimination_schedule {
            if s < 1 || s > d {
                return Err(Error::Config(format!(
                    "subset size {s} outside [1, {d}]"
                )));
            }
        }
        Ok(())
    }
}

/// One point of the accuracy curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub subset_size: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Accuracy as a function of retained-feature count.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub points: Vec<CurvePoint>,
    pub best_size: usize,
    pub best_accuracy: f64,
}

impl EvalCurve {
    /// Writes the curve as CSV: `subset_size,mean_accuracy,std_accuracy`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "subset_size,mean_accuracy,std_accuracy")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.subset_size, p.mean_accuracy, p.std_accuracy)?;
        }
        Ok(())
    }
}

/// Sizes d, d−1, ..., 1 when d ≤ 64; otherwise 32 geometrically spaced sizes
/// from d down to 1, bumped apart where rounding would collide, strictly
/// decreasing.
pub fn default_schedule(d: usize) -> Vec<usize> {
    if d == 0 {
        return Vec::new();
    }
    if d <= 64 {
        return (1..=d).rev().collect();
    }
    let count = 32usize;
    let ratio = (d as f64).powf(1.0 / (count - 1) as f64);
    let mut sizes: Vec<usize> = (0..count)
        .map(|j| (d as f64 / ratio.powi(j as i32)).round() as usize)
        .collect();
    sizes[0] = d;
    sizes[count - 1] = 1;
    // Rounding collapses the tail toward 1; bump collided sizes apart from
    // the tail upward to keep the schedule strictly decreasing.
    for i in (0..count - 1).rev() {
        if sizes[i] <= sizes[i + 1] {
            sizes[i] = sizes[i + 1] + 1;
        }
    }
    sizes
}

/// A one-vs-rest ridge least-squares classifier: weights (d×k) and one bias
/// per class; prediction is the argmax of the class scores.
#[derive(Debug, Clone)]
pub struct LinearModel {
    weights: DMatrix<f64>,
    bias: DVector<f64>,
}

impl LinearModel {
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    /// Predicted class per column of x (d×m).
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        let scores = self.weights.transpose() * x;
        let k = scores.nrows();
        (0..x.ncols())
            .map(|j| {
                let mut best = 0usize;
                let mut best_score = scores[(0, j)] + self.bias[0];
                for c in 1..k {
                    let s = scores[(c, j)] + self.bias[c];
                    if s > best_score {
                        best_score = s;
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// Fits the ridge one-vs-rest model: W minimizes
/// ‖WᵀX + b·1ᵀ − Y‖_F² + ridge·‖W‖_F². Centering eliminates b, leaving the
/// regularized normal equations (XcXcᵀ + ridge·I)W = XcYcᵀ solved by
/// Cholesky; b = ȳ − Wᵀx̄.
pub fn train_linear(
    x_train: &DMatrix<f64>,
    y_train: &DMatrix<f64>,
    ridge: f64,
) -> Result<LinearModel> {
    let (d, n) = (x_train.nrows(), x_train.ncols());
    let k = y_train.nrows();
    if y_train.ncols() != n {
        return Err(Error::Dimension(format!(
            "features have {n} samples but targets have {}",
            y_train.ncols()
        )));
    }
    if k < 2 {
        return Err(Error::Data("training data needs at least 2 classes".into()));
    }
    if ridge < 0.0 {
        return Err(Error::Config("ridge must be nonnegative".into()));
    }
    let x_mean = x_train.column_mean();
    let y_mean = y_train.column_mean();
    let ones = DMatrix::from_element(1, n, 1.0);
    let xc = x_train - &x_mean * &ones;
    let yc = y_train - &y_mean * &ones;

    let mut normal = &xc * xc.transpose();
    for i in 0..d {
        normal[(i, i)] += ridge;
    }
    let rhs = &xc * yc.transpose();
    let chol = normal.cholesky().ok_or_else(|| {
        Error::Numerical(
            "normal equations are singular; increase the ridge parameter (default 1e-3)".into(),
        )
    })?;
    let weights = chol.solve(&rhs);
    let bias = y_mean - weights.transpose() * x_mean;
    Ok(LinearModel { weights, bias })
}

/// Euclidean-distance majority vote over the k nearest training samples.
/// Vote ties break toward the class with the smaller mean neighbor distance,
/// then the smaller class index.
pub fn knn_predict(
    x_train: &DMatrix<f64>,
    labels_train: &[usize],
    x_test: &DMatrix<f64>,
    k: usize,
) -> Result<Vec<usize>> {
    let n_train = x_train.ncols();
    if labels_train.len() != n_train {
        return Err(Error::Dimension(format!(
            "training labels ({}) do not match training samples ({n_train})",
            labels_train.len()
        )));
    }
    if k == 0 || k > n_train {
        return Err(Error::Config(format!(
            "k = {k} must lie in [1, {n_train}]"
        )));
    }
    if x_test.nrows() != x_train.nrows() {
        return Err(Error::Dimension(
            "train and test feature dimensions differ".into(),
        ));
    }
    let n_classes = labels_train.iter().copied().max().unwrap_or(0) + 1;
    let mut predictions = Vec::with_capacity(x_test.ncols());
    for j in 0..x_test.ncols() {
        let probe = x_test.column(j);
        let mut dists: Vec<(f64, usize)> = (0..n_train)
            .map(|t| ((x_train.column(t) - probe).norm(), labels_train[t]))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; n_classes];
        let mut dist_sum = vec![0.0f64; n_classes];
        for &(dist, label) in dists.iter().take(k) {
            votes[label] += 1;
            dist_sum[label] += dist;
        }
        let mut best = 0usize;
        for c in 1..n_classes {
            let better = votes[c] > votes[best]
                || (votes[c] == votes[best] && votes[c] > 0 && {
                    let mean_c = dist_sum[c] / votes[c] as f64;
                    let mean_b = dist_sum[best] / votes[best] as f64;
                    mean_c < mean_b
                });
            if better {
                best = c;
            }
        }
        predictions.push(best);
    }
    Ok(predictions)
}

fn one_hot_rows(labels: &[usize], cols: &[usize], k: usize) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(k, cols.len());
    for (j, &col) in cols.iter().enumerate() {
        y[(labels[col], j)] = 1.0;
    }
    y
}

fn accuracy(predicted: &[usize], labels: &[usize], cols: &[usize]) -> f64 {
    let hits = predicted
        .iter()
        .zip(cols)
        .filter(|&(&p, &c)| p == labels[c])
        .count();
    hits as f64 / cols.len() as f64
}

/// Evaluates every subset size in the schedule: keep the top-s ranked
/// features, train on n_trials seeded 70/30 splits, score on the held-out
/// side, and record mean and population std. The same trial seeds are reused
/// across sizes, so the curve is paired. best_size is the smallest size
/// attaining the maximal mean accuracy.
pub fn backward_eliminate(
    ds: &Dataset,
    ranking: &FeatureRanking,
    cfg: &EvalConfig,
) -> Result<EvalCurve> {
    let d = ds.n_features();
    if ranking.len() != d {
        return Err(Error::Config(format!(
            "ranking covers {} features but the dataset has {d}",
            ranking.len()
        )));
    }
    cfg.validate(d)?;

    let ordered = ranking.ordered_indices();
    let k = ds.n_classes();
    let labels = ds.labels();

    // One split per trial, shared by all subset sizes.
    let splits: Vec<_> = (0..cfg.n_trials)
        .map(|t| split(ds, derive_seed(cfg.base_seed, STREAM_SPLIT + t as u64)))
        .collect::<Result<Vec<_>>>()?;

    let points: Vec<CurvePoint> = cfg
        .elimination_schedule
        .par_iter()
        .map(|&size| -> Result<CurvePoint> {
            let subset: Vec<usize> = ordered[..size].to_vec();
            let mut accs = Vec::with_capacity(cfg.n_trials);
            for s in &splits {
                let x_train = ds.restrict(&subset, &s.train);
                let x_test = ds.restrict(&subset, &s.test);
                let predicted = match cfg.classifier {
                    Classifier::Linear => {
                        let y_train = one_hot_rows(labels, &s.train, k);
                        let model = train_linear(&x_train, &y_train, cfg.ridge)?;
                        model.predict(&x_test)
                    }
                    Classifier::Knn => {
                        let train_labels: Vec<usize> =
                            s.train.iter().map(|&c| labels[c]).collect();
                        let k_eff = cfg.knn_k.min(s.train.len());
                        knn_predict(&x_train, &train_labels, &x_test, k_eff)?
                    }
                };
                accs.push(accuracy(&predicted, labels, &s.test));
            }
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64;
            Ok(CurvePoint {
                subset_size: size,
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = points
        .iter()
        .max_by(|a, b| {
            a.mean_accuracy
                .total_cmp(&b.mean_accuracy)
                // On accuracy ties the smaller subset wins.
                .then(b.subset_size.cmp(&a.subset_size))
        })
        .expect("schedule is nonempty");
    let (best_size, best_accuracy) = (best.subset_size, best.mean_accuracy);
    Ok(EvalCurve {
        points,
        best_size,
        best_accuracy,
    })
}
