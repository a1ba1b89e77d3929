//! Cross-validated k-NN regression on embedded features, baselines, and
//! iteration-count selection by cross-validation.
//!
//! Embeddings are fitted once on all rows before the folds are drawn; only
//! the regressor is cross-validated.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::solver::{run_with_snapshots, SolverConfig};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_KNN_K: usize = 5;

/// Seeded assignment of samples to folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// Fold index of each sample.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Shuffles `0..n` with the seed, then deals the permutation round-robin.
pub fn kfold_plan(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::InvalidConfig(format!(
            "fold count {k} must be in 2..={n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (pos, &sample) in perm.iter().enumerate() {
        assignments[sample] = pos % k;
    }
    Ok(FoldPlan {
        n,
        k,
        seed,
        assignments,
    })
}

/// Mean response of the `k` nearest training rows (Euclidean); equal
/// distances go to the lower training index.
pub fn knn_predict(
    train_x: &Matrix,
    train_y: &[f64],
    test_x: &Matrix,
    k: usize,
) -> Result<Vec<f64>> {
    let n = train_x.rows();
    if n == 0 || train_y.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if train_y.len() != n {
        return Err(Error::shape(format!(
            "{n} training rows but {} responses",
            train_y.len()
        )));
    }
    if train_x.cols() != test_x.cols() {
        return Err(Error::shape(format!(
            "train has {} columns, test has {}",
            train_x.cols(),
            test_x.cols()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k = {k} must be in 1..={n}")));
    }
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(test_x.rows());
    for t in 0..test_x.rows() {
        let q = test_x.row(t);
        dist.clear();
        dist.extend((0..n).map(|i| {
            let d: f64 = train_x
                .row(i)
                .iter()
                .zip(q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, i)
        }));
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mean = dist[..k].iter().map(|&(_, i)| train_y[i]).sum::<f64>() / k as f64;
        out.push(mean);
    }
    Ok(out)
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::shape(format!(
            "rmse over {} predictions and {} targets",
            pred.len(),
            actual.len()
        )));
    }
    let mse = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub dim: usize,
    pub seed: u64,
    pub knn_k: usize,
}

/// k-fold cross-validated RMSE of k-NN regression on `features`.
pub fn cv_rmse(
    method: &str,
    features: &Matrix,
    y: &[f64],
    plan: &FoldPlan,
    knn_k: usize,
) -> Result<EvalReport> {
    if features.rows() != y.len() || plan.n != y.len() {
        return Err(Error::shape(format!(
            "{} feature rows, {} responses, plan over {}",
            features.rows(),
            y.len(),
            plan.n
        )));
    }
    let mut fold_rmse = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let test = plan.fold_indices(fold);
        let train: Vec<usize> = (0..plan.n)
            .filter(|&i| plan.assignments[i] != fold)
            .collect();
        let k = knn_k.min(train.len());
        let train_y: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let test_y: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let pred = knn_predict(
            &features.select_rows(&train)?,
            &train_y,
            &features.select_rows(&test)?,
            k,
        )?;
        fold_rmse.push(rmse(&pred, &test_y)?);
    }
    let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
    Ok(EvalReport {
        method: method.to_owned(),
        fold_rmse,
        mean_rmse,
        dim: features.cols(),
        seed: plan.seed,
        knn_k,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointScore {
    pub iter: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct IterationSelection {
    pub best_iter: usize,
    pub best_embedding: Matrix,
    pub scores: Vec<CheckpointScore>,
}

/// Runs the solver once up to `config.max_iter`, scores the embedding at
/// each checkpoint and keeps the one with the lowest mean CV RMSE (ties go
/// to the earlier checkpoint).
pub fn select_iterations_by_cv(
    dataset: &Dataset,
    config: &SolverConfig,
    checkpoints: &[usize],
    plan: &FoldPlan,
    knn_k: usize,
) -> Result<IterationSelection> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidConfig("no checkpoints given".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "checkpoints must be strictly ascending".into(),
        ));
    }
    if checkpoints[0] == 0 || *checkpoints.last().unwrap() > config.max_iter {
        return Err(Error::InvalidConfig(format!(
            "checkpoints must lie in 1..={}",
            config.max_iter
        )));
    }
    if dataset.q() != 1 {
        return Err(Error::InvalidConfig(
            "cross-validation needs exactly one response column".into(),
        ));
    }
    let y = dataset.y.col(0);
    let (_, snapshots) = run_with_snapshots(dataset, config, checkpoints)?;
    let mut scores = Vec::with_capacity(checkpoints.len());
    for (&iter, snap) in checkpoints.iter().zip(&snapshots) {
        let report = cv_rmse("embedding", snap, &y, plan, knn_k)?;
        scores.push(CheckpointScore { iter, report });
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.report.mean_rmse < scores[best].report.mean_rmse {
            best = i;
        }
    }
    Ok(IterationSelection {
        best_iter: scores[best].iter,
        best_embedding: snapshots[best].clone(),
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Identity,
    RandomProjection,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Identity => "identity",
            Baseline::RandomProjection => "random_projection",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Baseline::Identity),
            "random_projection" => Some(Baseline::RandomProjection),
            _ => None,
        }
    }
}

/// `X · G / √d` with `G` a seeded standard normal p×d matrix.
pub fn random_projection(x: &Matrix, d: usize, seed: u64) -> Result<Matrix> {
    if d == 0 || d > x.cols() {
        return Err(Error::InvalidConfig(format!(
            "projection dimension {d} must be in 1..={}",
            x.cols()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Vec<f64> = (0..x.cols() * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let g = Matrix::from_vec(x.cols(), d, g)?.scale(1.0 / (d as f64).sqrt());
    x.matmul(&g)
}

/// Named baseline feature sets: the raw features and a random projection.
pub fn baseline_embeddings(x: &Matrix, d: usize, seed: u64) -> Result<Vec<(Baseline, Matrix)>> {
    Ok(vec![
        (Baseline::Identity, x.clone()),
        (Baseline::RandomProjection, random_projection(x, d, seed)?),
    ])
}
